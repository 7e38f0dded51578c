#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slnlss {

/// Invalid distribution parameters or non-finite scalar inputs.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Shape problems: dimension mismatch, rank deficiency, missing columns.
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation produced a non-finite value or a linear solve failed.
/// `index` is the offending row (or iteration, when raised from the fit loop).
class NumericError : public std::runtime_error {
public:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    explicit NumericError(const std::string& what, std::size_t index = npos)
        : std::runtime_error(what), index_(index) {}

    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Bootstrap or criteria computations that cannot produce a result.
class InferenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace slnlss
