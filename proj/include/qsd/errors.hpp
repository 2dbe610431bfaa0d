#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qsd {

// Invalid parameters or out-of-domain inputs. Collects every violated
// constraint so callers can report them all at once.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(std::vector<std::string> constraints)
        : std::invalid_argument(join(constraints)), constraints_(std::move(constraints)) {}

    explicit ValidationError(const std::string& constraint)
        : ValidationError(std::vector<std::string>{constraint}) {}

    const std::vector<std::string>& constraints() const noexcept { return constraints_; }

private:
    static std::string join(const std::vector<std::string>& cs) {
        std::string out = "validation failed:";
        for (const auto& c : cs) {
            out += "\n  - ";
            out += c;
        }
        return out;
    }

    std::vector<std::string> constraints_;
};

// A numerical routine did not converge. Carries the best estimate available
// at the point of failure together with its estimated error bound.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double best_estimate = 0.0, double error_bound = 0.0)
        : std::runtime_error(what), best_estimate_(best_estimate), error_bound_(error_bound) {}

    double best_estimate() const noexcept { return best_estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double best_estimate_;
    double error_bound_;
};

// Helper used by validating constructors: accumulate failures, throw once.
class ConstraintChecker {
public:
    void require(bool ok, const std::string& constraint) {
        if (!ok) failures_.push_back(constraint);
    }
    void finish() const {
        if (!failures_.empty()) throw ValidationError(failures_);
    }

private:
    std::vector<std::string> failures_;
};

}  // namespace qsd
