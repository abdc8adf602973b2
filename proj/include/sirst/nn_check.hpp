#pragma once
// Self-contained invariant suite for the SAMF kernel and the two-branch
// objective, driven by the `nn-check` subcommand.

#include <cstdint>
#include <string>
#include <vector>

namespace sirst::nn {

struct CheckRow {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Central-difference step and the tolerance the suite enforces.
inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;
// Denominator floor for relative error so entries whose true gradient is
// near zero are judged on absolute error instead.
inline constexpr double kFdFloor = 1e-6;

double relative_error(double analytic, double numeric);

std::vector<CheckRow> run_nn_checks(std::uint64_t seed = 7);

}  // namespace sirst::nn
