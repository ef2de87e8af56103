#include "glt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace glt {

namespace {

void require_pairs(std::span<const double> pred, std::span<const double> target, const char* what)
{
    if (pred.size() != target.size())
        throw ContractError(std::string(what) + ": " + std::to_string(pred.size()) + " predictions for " +
                            std::to_string(target.size()) + " targets");
    if (pred.empty()) throw ContractError(std::string(what) + ": empty input");
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (!std::isfinite(pred[i]) || !std::isfinite(target[i]))
            throw NumericalError(std::string(what) + ": non-finite value at index " + std::to_string(i));
}

} // namespace

double mae(std::span<const double> pred, std::span<const double> target)
{
    require_pairs(pred, target, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::fabs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

double pearson_r(std::span<const double> pred, std::span<const double> target)
{
    require_pairs(pred, target, "pearson_r");
    if (pred.size() < 2) throw UndefinedCorrelationError("pearson_r: need at least two pairs");
    const double n = static_cast<double>(pred.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mx += pred[i];
        my += target[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double dx = pred[i] - mx, dy = target[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw UndefinedCorrelationError("pearson_r: zero variance");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double cumulative_score(std::span<const double> pred, std::span<const double> target, double alpha)
{
    require_pairs(pred, target, "cumulative_score");
    if (!(alpha >= 0.0)) throw ContractError("cumulative_score: alpha must be non-negative");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (std::fabs(pred[i] - target[i]) <= alpha) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

std::vector<double> default_cs_grid()
{
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(0.5 * i);
    return grid;
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> target, std::span<const double> alphas)
{
    EvalReport r;
    r.n = pred.size();
    r.mae = mae(pred, target);
    try {
        r.pearson_r = pearson_r(pred, target);
    } catch (const UndefinedCorrelationError&) {
        r.pearson_r.reset();
    }
    for (double a : alphas) r.cs.emplace_back(a, cumulative_score(pred, target, a));
    return r;
}

EvalReport evaluate(std::span<const double> pred, std::span<const double> target)
{
    const auto grid = default_cs_grid();
    return evaluate(pred, target, grid);
}

void write_report_csv(std::ostream& os, const EvalReport& report, const std::string& label)
{
    const auto old = os.precision(17);
    const std::string prefix = label.empty() ? "" : label + ",";
    os << prefix << "n," << report.n << '\n';
    os << prefix << "mae," << report.mae << '\n';
    os << prefix << "pearson_r,";
    if (report.pearson_r)
        os << *report.pearson_r;
    else
        os << "nan";
    os << '\n';
    for (const auto& [a, v] : report.cs) os << prefix << "cs@" << a << ',' << v << '\n';
    os.precision(old);
}

void write_report_table(std::ostream& os, const EvalReport& report, const std::string& label)
{
    if (!label.empty()) os << "== " << label << " ==\n";
    os << std::fixed << std::setprecision(4);
    os << "  n          " << report.n << '\n';
    os << "  MAE        " << report.mae << " years\n";
    os << "  Pearson r  ";
    if (report.pearson_r)
        os << *report.pearson_r;
    else
        os << "undefined";
    os << '\n';
    for (const auto& [a, v] : report.cs)
        os << "  CS(" << std::setprecision(1) << a << ")" << std::setw(a < 10 ? 8 : 7) << std::setprecision(2) << v
           << " %\n";
    os << std::defaultfloat << std::setprecision(6);
}

} // namespace glt
