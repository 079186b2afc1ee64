#pragma once

#include <stdexcept>
#include <string>

namespace qsp {

// Thrown when a request exceeds the simulator's memory/qubit envelope.
class resource_error : public std::runtime_error {
public:
    explicit resource_error(const std::string& what) : std::runtime_error(what) {}
};

// Thrown for arguments outside an operation's documented domain.
class domain_error : public std::invalid_argument {
public:
    explicit domain_error(const std::string& what) : std::invalid_argument(what) {}
};

// Postselection on an outcome whose probability is numerically zero.
class degenerate_branch_error : public std::runtime_error {
public:
    explicit degenerate_branch_error(const std::string& what) : std::runtime_error(what) {}
};

// A retry loop (postselection) exhausted its cap.
class retry_exhausted_error : public std::runtime_error {
public:
    explicit retry_exhausted_error(const std::string& what) : std::runtime_error(what) {}
};

// An accuracy target cannot be met within the qubit/precision budget.
class budget_error : public std::runtime_error {
public:
    explicit budget_error(const std::string& what) : std::runtime_error(what) {}
};

// Internal numerical verification failed (norm drift, oracle mismatch).
class verification_error : public std::runtime_error {
public:
    explicit verification_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qsp
