#pragma once

#include <stdexcept>
#include <string>

namespace clask {

/// Raised for every contract violation or numerical failure inside the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

[[noreturn]] inline void fail(const std::string& what) { throw Error(what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(what);
}

}  // namespace detail
}  // namespace clask
