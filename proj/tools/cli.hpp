#pragma once

// Subcommands of the bsmooth tool. run() never exits the process, so the
// test suite can drive it in-process.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bsmooth/csv.hpp"
#include "bsmooth/fitting.hpp"
#include "bsmooth/penalty.hpp"
#include "bsmooth/simulate.hpp"
#include "bsmooth/tensor.hpp"

namespace bsmooth::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 2;
inline constexpr int kNumerical = 3;

namespace detail {

struct BasisOptions {
  std::size_t k = 10;
  int m1 = 3;
  double a = 0.0;
  double b = 1.0;
  std::string knots_file;
};

inline void add_basis_options(CLI::App& app, BasisOptions& o) {
  app.add_option("--k", o.k, "Number of basis functions")->check(CLI::PositiveNumber);
  app.add_option("--m1", o.m1, "Spline order (3 = cubic)")->check(CLI::NonNegativeNumber);
  app.add_option("--a", o.a, "Left end of the interval");
  app.add_option("--b", o.b, "Right end of the interval");
  app.add_option("--knots-file", o.knots_file, "Interior knots, one ascending value per line (overrides --k/--a/--b)")
      ->check(CLI::ExistingFile);
}

inline BSplineBasis make_basis_from(const BasisOptions& o, const CLI::App& app) {
  if (o.knots_file.empty()) return make_basis(o.k, o.m1, o.a, o.b);
  const std::vector<double> interior = read_values(o.knots_file);
  const BSplineBasis basis = BSplineBasis::from_interior(o.m1, interior);
  if (app.count("--k") > 0 && basis.size() != o.k) {
    throw InvalidArgument("--k " + std::to_string(o.k) + " disagrees with " + std::to_string(interior.size()) +
                          " interior knots, which give k = " + std::to_string(basis.size()));
  }
  return basis;
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

template <typename T>
std::vector<T> broadcast(std::vector<T> v, std::size_t d, const char* name) {
  if (v.size() == 1) v.assign(d, v.front());
  if (v.size() != d) {
    throw InvalidArgument(std::string(name) + " needs 1 or " + std::to_string(d) + " values, got " +
                          std::to_string(v.size()));
  }
  return v;
}

inline std::vector<std::optional<double>> parse_lambdas(const std::vector<std::string>& raw, std::size_t d) {
  std::vector<std::optional<double>> out;
  for (const auto& s : broadcast(raw, d, "--lambda")) {
    if (s == "auto") {
      out.emplace_back();
      continue;
    }
    double v = 0.0;
    if (!bsmooth::detail::parse_double(s, v) || v < 0.0) {
      throw InvalidArgument("--lambda values must be 'auto' or non-negative numbers, got '" + s + "'");
    }
    out.emplace_back(v);
  }
  return out;
}

}  // namespace detail

struct FitOptions {
  std::string input;
  std::size_t dims = 0;
  std::vector<std::size_t> k{10};
  std::vector<int> m1{3};
  std::vector<int> m2{2};
  std::vector<double> lower;
  std::vector<double> upper;
  std::string knots = "even";
  std::string reduce = "on";
  std::vector<std::string> lambda{"auto"};
  std::string criterion = "gcv";
  std::string out = ".";
};

struct FitOutcome {
  TensorSmooth smooth;
  FitResult result;
  double seconds = 0.0;
};

/// Builds the smooth described by `o` over `points`, optionally reduces it,
/// and fits. Timing covers reduction, design assembly and fitting.
inline FitOutcome fit_tensor(const FitOptions& o, const PointSet& points, std::span<const double> y) {
  const std::size_t d = points.dims();
  const auto k = detail::broadcast(o.k, d, "--k");
  const auto m1 = detail::broadcast(o.m1, d, "--m1");
  const auto m2 = detail::broadcast(o.m2, d, "--m2");
  const auto lambdas = detail::parse_lambdas(o.lambda, d);
  std::vector<double> lower = o.lower.empty() ? std::vector<double>{} : detail::broadcast(o.lower, d, "--lower");
  std::vector<double> upper = o.upper.empty() ? std::vector<double>{} : detail::broadcast(o.upper, d, "--upper");
  const auto placement = o.knots == "quantile" ? KnotPlacement::quantile : KnotPlacement::even;

  std::vector<Marginal> margins;
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) col[i] = points[i][j];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double a = lower.empty() ? *lo : lower[j];
    const double b = upper.empty() ? *hi : upper[j];
    (void)PenaltySpec::make(m1[j], m2[j]);
    margins.push_back(make_marginal(make_basis(k[j], m1[j], a, b, placement, col), m2[j]));
  }

  SelectOptions sel;
  sel.criterion = o.criterion == "reml" ? Criterion::reml : Criterion::gcv;
  const auto start = std::chrono::steady_clock::now();
  TensorSmooth smooth(std::move(margins));
  if (o.reduce == "on") smooth = smooth.reduce(points);
  const PenalizedRegression pr(make_problem(smooth, points, y, lambdas));
  FitResult result = select_lambda(pr, sel);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return FitOutcome{std::move(smooth), std::move(result), seconds};
}

inline nlohmann::json summary_json(const FitOptions& o, const FitOutcome& f, std::size_t n) {
  const std::size_t d = f.smooth.dims();
  nlohmann::json j;
  j["dims"] = d;
  j["n"] = n;
  nlohmann::json k = nlohmann::json::array();
  nlohmann::json m1 = nlohmann::json::array();
  nlohmann::json m2 = nlohmann::json::array();
  nlohmann::json domain = nlohmann::json::array();
  for (const auto& m : f.smooth.marginals()) {
    k.push_back(m.basis.size());
    m1.push_back(m.basis.order());
    m2.push_back(m.penalty.spec.m2);
    domain.push_back({m.basis.a(), m.basis.b()});
  }
  j["k"] = k;
  j["m1"] = m1;
  j["m2"] = m2;
  j["domain"] = domain;
  j["knots"] = o.knots;
  j["reduce"] = o.reduce == "on";
  j["coefficients"] = {{"full", f.smooth.full_size()}, {"retained", f.smooth.size()}};
  j["lambdas"] = f.result.lambdas;
  j["edf"] = f.result.edf;
  j["score"] = f.result.score;
  j["criterion"] = to_string(f.result.criterion);
  j["rss"] = f.result.rss;
  j["fit_seconds"] = f.seconds;
  return j;
}

class Runner {
 public:
  Runner(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"B-spline smoothers with derivative penalties", "bsmooth"};
    app.require_subcommand(1);

    auto* basis_cmd = app.add_subcommand("basis", "Evaluate a B-spline basis on a grid");
    detail::BasisOptions basis_opt;
    detail::add_basis_options(*basis_cmd, basis_opt);
    int deriv = 0;
    std::size_t points = 201;
    std::string basis_out = "basis.csv";
    basis_cmd->add_option("--deriv", deriv, "Derivative order")->check(CLI::NonNegativeNumber);
    basis_cmd->add_option("--points", points, "Grid size")->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
    basis_cmd->add_option("--out", basis_out, "Output CSV");

    auto* penalty_cmd = app.add_subcommand("penalty", "Build the derivative penalty S and its root D");
    detail::BasisOptions pen_opt;
    detail::add_basis_options(*penalty_cmd, pen_opt);
    int m2 = 2;
    std::string format = "dense";
    std::string pen_out = ".";
    penalty_cmd->add_option("--m2", m2, "Derivative order penalized")->check(CLI::NonNegativeNumber);
    penalty_cmd->add_option("--format", format, "dense, triplets or both")
        ->check(CLI::IsMember({"dense", "triplets", "both"}));
    penalty_cmd->add_option("--out", pen_out, "Output directory");

    auto* sim_cmd = app.add_subcommand("simulate", "Sample the test surface on two diagonal strips");
    std::size_t n = 2000;
    std::uint64_t seed = 1;
    double sd = 0.1;
    std::string sim_out = "data.csv";
    sim_cmd->add_option("--n", n, "Number of points")->check(CLI::PositiveNumber);
    sim_cmd->add_option("--seed", seed, "Random seed");
    sim_cmd->add_option("--sd", sd, "Noise standard deviation")->check(CLI::NonNegativeNumber);
    sim_cmd->add_option("--out", sim_out, "Output CSV");

    auto* fit_cmd = app.add_subcommand("fit", "Fit a tensor-product smooth to CSV data");
    FitOptions fo;
    fit_cmd->add_option("--input", fo.input, "CSV with a header, d covariate columns, then the response")
        ->required()
        ->check(CLI::ExistingFile);
    fit_cmd->add_option("--dims", fo.dims, "Number of covariates d")->required()->check(CLI::PositiveNumber);
    fit_cmd->add_option("--k", fo.k, "Basis size per dimension")->delimiter(',')->check(CLI::PositiveNumber);
    fit_cmd->add_option("--m1", fo.m1, "Spline order per dimension")->delimiter(',')->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--m2", fo.m2, "Penalty order per dimension")->delimiter(',')->check(CLI::NonNegativeNumber);
    fit_cmd->add_option("--lower", fo.lower, "Domain lower bounds (default: data minimum)")->delimiter(',');
    fit_cmd->add_option("--upper", fo.upper, "Domain upper bounds (default: data maximum)")->delimiter(',');
    fit_cmd->add_option("--knots", fo.knots, "even or quantile")->check(CLI::IsMember({"even", "quantile"}));
    fit_cmd->add_option("--reduce", fo.reduce, "Drop coefficients without data")->check(CLI::IsMember({"on", "off"}));
    fit_cmd->add_option("--lambda", fo.lambda, "auto, or smoothing parameters per dimension")->delimiter(',');
    fit_cmd->add_option("--criterion", fo.criterion, "gcv or reml")->check(CLI::IsMember({"gcv", "reml"}));
    fit_cmd->add_option("--out", fo.out, "Output directory");

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out_, err_) == 0 ? kOk : kUsage;
    }

    try {
      if (*basis_cmd) return cmd_basis(basis_opt, *basis_cmd, deriv, points, basis_out);
      if (*penalty_cmd) return cmd_penalty(pen_opt, *penalty_cmd, m2, format, pen_out);
      if (*sim_cmd) return cmd_simulate(n, seed, sd, sim_out);
      return cmd_fit(fo);
    } catch (const InvalidArgument& e) {
      err_ << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const IoError& e) {
      err_ << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const NumericalError& e) {
      err_ << "numerical failure: " << e.what() << '\n';
      return kNumerical;
    }
  }

 private:
  int cmd_basis(const detail::BasisOptions& o, const CLI::App& app, int deriv, std::size_t points,
                const std::string& path) {
    const BSplineBasis basis = detail::make_basis_from(o, app);
    std::vector<double> xs(points);
    for (std::size_t i = 0; i < points; ++i) {
      xs[i] = std::min(basis.b(), basis.a() + (basis.b() - basis.a()) * static_cast<double>(i) /
                                                  static_cast<double>(points - 1));
    }
    const Eigen::MatrixXd g = design_matrix(basis, xs, deriv).to_dense();
    write_atomically(path, [&](std::ostream& os) {
      os << 'x';
      for (std::size_t i = 0; i < basis.size(); ++i) os << ",B" << i;
      os << '\n';
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        os << xs[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < g.cols(); ++c) os << ',' << g(r, c);
        os << '\n';
      }
    });
    out_ << "k " << basis.size() << "\ninterval " << basis.a() << ' ' << basis.b() << '\n';
    return kOk;
  }

  int cmd_penalty(const detail::BasisOptions& o, const CLI::App& app, int m2, const std::string& format,
                  const std::string& dir) {
    const PenaltySpec spec = PenaltySpec::make(o.m1, m2);
    const BSplineBasis basis = detail::make_basis_from(o, app);
    if (spec.p() >= kIllConditionedOrder) {
      err_ << "warning: m1 - m2 = " << spec.p() << " makes the local quadrature ill-conditioned\n";
    }
    const PenaltyFactor pf = build_penalty(basis, spec);
    detail::ensure_directory(dir);
    const std::filesystem::path root(dir);
    if (format != "triplets") {
      write_atomically(root / "S.csv", [&](std::ostream& os) { write_dense_csv(os, pf.S); });
      write_atomically(root / "D.csv", [&](std::ostream& os) { write_dense_csv(os, pf.D.to_dense()); });
    }
    if (format != "dense") {
      write_atomically(root / "S_triplets.csv", [&](std::ostream& os) { write_triplets(os, pf.S); });
      write_atomically(root / "D_triplets.csv", [&](std::ostream& os) { write_triplets(os, pf.D); });
    }
    out_ << "k " << basis.size() << "\nbands " << pf.S.nonzero_diagonals() << "\nnull_space "
         << null_space_dimension(pf.S) << '\n';
    return kOk;
  }

  int cmd_simulate(std::size_t n, std::uint64_t seed, double sd, const std::string& path) {
    const Sample s = simulate(n, seed, sd);
    write_atomically(path, [&](std::ostream& os) {
      os << "x,z,y\n";
      for (std::size_t i = 0; i < n; ++i) os << s.x[i] << ',' << s.z[i] << ',' << s.y[i] << '\n';
    });
    out_ << "wrote " << n << " rows to " << path << '\n';
    return kOk;
  }

  int cmd_fit(const FitOptions& o) {
    const CsvTable table = read_csv(o.input);
    const std::size_t d = o.dims;
    if (table.header.size() != d + 1) {
      throw InvalidArgument("--dims " + std::to_string(d) + " needs " + std::to_string(d + 1) + " columns, input has " +
                            std::to_string(table.header.size()));
    }
    if (table.rows.empty()) throw InvalidArgument("input has no data rows");
    std::vector<double> coords;
    coords.reserve(table.rows.size() * d);
    std::vector<double> y;
    y.reserve(table.rows.size());
    for (const auto& r : table.rows) {
      coords.insert(coords.end(), r.begin(), r.begin() + static_cast<std::ptrdiff_t>(d));
      y.push_back(r[d]);
    }
    const PointSet points(d, std::move(coords));
    const FitOutcome f = fit_tensor(o, points, y);

    detail::ensure_directory(o.out);
    const std::filesystem::path root(o.out);
    write_atomically(root / "fitted.csv", [&](std::ostream& os) {
      for (const auto& h : table.header) os << h << ',';
      os << "fitted\n";
      for (std::size_t i = 0; i < table.rows.size(); ++i) {
        for (double v : table.rows[i]) os << v << ',';
        os << f.result.fitted(static_cast<Eigen::Index>(i)) << '\n';
      }
    });
    write_atomically(root / "retained.csv", [&](std::ostream& os) { write_retained_csv(os, f.smooth); });
    const nlohmann::json summary = summary_json(o, f, table.rows.size());
    write_atomically(root / "summary.json", [&](std::ostream& os) { os << summary.dump(2) << '\n'; });
    out_ << "coefficients " << f.smooth.size() << " of " << f.smooth.full_size() << "\nedf " << f.result.edf
         << '\n' << to_string(f.result.criterion) << ' ' << f.result.score << '\n';
    return kOk;
  }

  std::ostream& out_;
  std::ostream& err_;
};

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return Runner(out, err).run(argc, argv);
}

}  // namespace bsmooth::cli
