#pragma once

#include <gtest/gtest.h>

#include "medsum/error.hpp"

/// Asserts that `stmt` throws medsum::Error carrying `expected_code`.
#define EXPECT_MEDSUM_ERROR(stmt, expected_code)                                                        \
    do {                                                                                                \
        try {                                                                                           \
            stmt;                                                                                       \
            ADD_FAILURE() << "expected " << medsum::to_string(expected_code) << ", nothing thrown";     \
        } catch (const medsum::Error& e) {                                                              \
            EXPECT_EQ(e.code(), expected_code) << e.what();                                             \
        }                                                                                               \
    } while (0)
