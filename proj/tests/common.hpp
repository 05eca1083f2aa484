#pragma once

#include <doctest.h>

#include <filesystem>
#include <functional>
#include <string>

#include "cranial/error.hpp"

namespace testing_util {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("cranial_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Kind of the cranial::Error thrown by f; fails the test if nothing is thrown.
inline cranial::ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const cranial::Error& e) {
        return e.kind();
    }
    FAIL("expected a cranial::Error");
    return cranial::ErrorKind::InvalidArgument;
}

}  // namespace testing_util
