#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "glt/error.hpp"

namespace glt {

// Pearson correlation requested for a sample with no spread.
class UndefinedCorrelationError : public ContractError {
public:
    using ContractError::ContractError;
};

double mae(std::span<const double> pred, std::span<const double> target);

// Clamped to [-1, 1].
double pearson_r(std::span<const double> pred, std::span<const double> target);

/// Percentage of samples whose absolute error is at most alpha (inclusive).
double cumulative_score(std::span<const double> pred, std::span<const double> target, double alpha);

// 0, 0.5, ..., 5 years
std::vector<double> default_cs_grid();

struct EvalReport {
    std::size_t n = 0;
    double mae = 0.0;
    std::optional<double> pearson_r; // absent when either side has zero variance
    std::vector<std::pair<double, double>> cs; // (alpha, percentage)
};

EvalReport evaluate(std::span<const double> pred, std::span<const double> target,
                    std::span<const double> alphas);
EvalReport evaluate(std::span<const double> pred, std::span<const double> target);

// metric,value rows: n, mae, pearson_r, cs@<alpha>
void write_report_csv(std::ostream& os, const EvalReport& report, const std::string& label = "");
void write_report_table(std::ostream& os, const EvalReport& report, const std::string& label = "");

} // namespace glt
