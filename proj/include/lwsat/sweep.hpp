#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "lwsat/error.hpp"
#include "lwsat/eval.hpp"
#include "lwsat/gen.hpp"
#include "lwsat/trainer.hpp"

namespace lwsat {

enum class SweepAxis { discount, train_size };

struct SweepRow {
  double value = 0;       // the axis value for this row
  std::uint64_t seed = 0; // training seed used for the row
  double m_flips = 0;
  double ci_lo = 0, ci_hi = 0; // bootstrap 95% CI of the median
  double a_flips = 0;
  double solved_pct = 0;
};

struct SweepReport {
  SweepAxis axis;
  std::vector<SweepRow> rows;
};

inline const char* sweep_axis_name(SweepAxis a) {
  return a == SweepAxis::discount ? "discount" : "train_size";
}

/// Trains one policy per axis value and evaluates it on the dataset's test
/// split. Each row trains with its own derived seed, so repeated values
/// yield independent repetitions; the evaluation seed is shared across rows
/// for a paired comparison.
inline SweepReport sweep(SweepAxis axis, const std::vector<double>& values, const Dataset& ds,
                         const TrainConfig& base_train, const EvalConfig& eval_cfg,
                         unsigned threads = 1) {
  if (values.empty()) throw Error("sweep needs at least one axis value");
  if (ds.test.empty()) throw Error("sweep needs a nonempty test split");
  SweepReport rep;
  rep.axis = axis;
  for (std::size_t row = 0; row < values.size(); ++row) {
    TrainConfig cfg = base_train;
    cfg.seed = derive_seed(base_train.seed, row);
    Dataset subset = ds;
    if (axis == SweepAxis::discount) {
      cfg.gamma = values[row];
    } else {
      const double v = values[row];
      if (v < 1 || v != std::floor(v) || static_cast<std::size_t>(v) > ds.train.size())
        throw Error("train_size value out of range: " + std::to_string(v));
      subset.train.resize(static_cast<std::size_t>(v));
    }
    TrainReport tr = train(subset, cfg, {}, threads);
    EvalReport er = evaluate_solver(policy_solver(tr.params), ds.test, eval_cfg, threads);
    std::vector<double> medians;
    medians.reserve(er.instances.size());
    for (const InstanceResult& ir : er.instances) medians.push_back(ir.median_flips);
    BootstrapCi ci =
        bootstrap_median_ci(medians, derive_seed(eval_cfg.seed, 500'000 + row));
    rep.rows.push_back(SweepRow{values[row], cfg.seed, er.m_flips, ci.lo, ci.hi, er.a_flips,
                                er.solved_pct});
  }
  return rep;
}

inline std::string sweep_to_csv(const SweepReport& rep) {
  std::ostringstream os;
  os << sweep_axis_name(rep.axis) << ",seed,m_flips,ci_lo,ci_hi,a_flips,solved_pct\n";
  for (const SweepRow& r : rep.rows)
    os << detail::csv_double(r.value) << "," << r.seed << "," << detail::csv_double(r.m_flips)
       << "," << detail::csv_double(r.ci_lo) << "," << detail::csv_double(r.ci_hi) << ","
       << detail::csv_double(r.a_flips) << "," << detail::csv_double(r.solved_pct) << "\n";
  return os.str();
}

} // namespace lwsat
