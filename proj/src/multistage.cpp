#include "poreflow/multistage.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace poreflow {

void StagePlan::validate() const {
  if (stages.empty()) throw Error(ErrorKind::InvalidInput, "plan has no stages");
  if (!(R > 0.0 && R <= 1.0)) throw Error(ErrorKind::InvalidInput, "plan R outside (0,1]");
  if (!(target > 0.0 && target <= 1.0)) throw Error(ErrorKind::InvalidInput, "target outside (0,1]");
  for (const auto& s : stages) {
    if (s.filters < 1) throw Error(ErrorKind::InvalidInput, "each stage needs at least one filter");
    if (s.max_passes < 0) throw Error(ErrorKind::InvalidInput, "negative pass cap");
  }
}

FilterInstance make_filter(const ShapeFunction& shape, int stage, int index, const SimConfig& cfg) {
  auto check = validate_shape(shape, cfg.n_x);
  if (!check.feasible) throw Error(ErrorKind::MalformedShape, "stage filter shape is infeasible");
  FilterInstance f;
  f.stage = stage;
  f.index = index;
  f.shape = shape;
  f.profile = make_profile(shape, cfg.n_x);
  f.clean = f.profile.radii;
  f.u_clean = flux_constant_pressure(f.profile);
  return f;
}

namespace {

bool spent(Termination t) { return t == Termination::FluxThreshold || t == Termination::PoreClosed; }

}  // namespace

Batch run_stage1_filter(FilterInstance& filter, const FeedSpec& feed, const SimConfig& cfg) {
  if (filter.uses != 0 || filter.exhausted) throw Error(ErrorKind::InvalidInput, "stage-1 filter is not clean");
  auto rec = run_from_profile(filter.profile, filter.clean, feed, feed.inlet(), cfg, filter.u_clean);
  if (!spent(rec.termination)) throw Error(ErrorKind::NoExhaustion, "stage-1 filter never fouled");
  filter.profile = rec.final_profile;
  filter.exhausted = true;
  filter.uses = 1;
  Batch b;
  b.volume = rec.j_final();
  filter.processed = b.volume;
  for (std::size_t i = 0; i < rec.species(); ++i) b.conc.push_back(rec.c_acm[i].back());
  return b;
}

PassResult run_pass(FilterInstance& filter, const Batch& inflow, const FeedSpec& feed, const SimConfig& cfg) {
  if (filter.exhausted) throw Error(ErrorKind::FilterExhausted, "filter has no capacity left");
  PassResult out;
  out.outflow.conc = inflow.conc;
  if (!(inflow.volume > 0.0)) return out;

  auto rec = run_from_profile(filter.profile, filter.clean, feed, inflow.conc, cfg, filter.u_clean, inflow.volume);
  if (rec.termination == Termination::StepCap)
    throw Error(ErrorKind::NoExhaustion, "pass hit the step cap");
  filter.profile = rec.final_profile;
  filter.uses += 1;
  const double processed = rec.j_final();
  if (spent(rec.termination)) {
    filter.exhausted = true;
    out.outflow.volume = processed;
    out.discarded = inflow.volume - processed;
  } else {
    out.outflow.volume = inflow.volume;
  }
  if (processed > 0.0)
    for (std::size_t i = 0; i < rec.species(); ++i) out.outflow.conc[i] = rec.c_acm[i].back();
  filter.processed += out.outflow.volume;
  filter.discarded += out.discarded;
  return out;
}

namespace {

double removal(const Batch& b, const std::vector<double>& feed_conc) {
  return feed_conc[0] > 0.0 ? 1.0 - b.conc[0] / feed_conc[0] : 1.0;
}

// Runs one stage of `count` identical filters, each receiving an equal share of `in`.
// The shared state is simulated once and copied to the sibling filters.
Batch run_stage(int stage, int count, int max_passes, const Batch& in, const ShapeFunction& shape,
                const FeedSpec& feed, const SimConfig& cfg, const std::vector<double>& feed_conc,
                double target, MultiStageResult& res, bool& done) {
  FilterInstance f = make_filter(shape, stage, 0, cfg);
  Batch share{in.volume / count, in.conc};
  StageSummary sum;
  sum.stage = stage;
  sum.filters = count;
  sum.volume_in = in.volume;
  for (int p = 0; p < max_passes && share.volume > 0.0; ++p) {
    auto r = run_pass(f, share, feed, cfg);
    sum.discarded += r.discarded * count;
    share = r.outflow;
    if (removal(share, feed_conc) >= target) {
      done = true;
      break;
    }
    if (f.exhausted) break;
  }
  sum.passes = f.uses;
  sum.volume_out = share.volume * count;
  res.discarded += sum.discarded;
  res.stages.push_back(sum);
  for (int i = 0; i < count; ++i) {
    f.index = i;
    res.ledger.push_back(f);
  }
  res.M += count;
  return Batch{share.volume * count, share.conc};
}

}  // namespace

MultiStageResult run_protocol(const StagePlan& plan, const ShapeFunction& shape, const FeedSpec& feed,
                              const SimConfig& cfg) {
  plan.validate();
  feed.validate();
  const auto feed_conc = feed.inlet();
  MultiStageResult res;

  const int l1 = plan.stages.front().filters;
  FilterInstance first = make_filter(shape, 1, 0, cfg);
  Batch b = run_stage1_filter(first, feed, cfg);
  for (int i = 0; i < l1; ++i) {
    first.index = i;
    res.ledger.push_back(first);
  }
  res.M = l1;
  b.volume *= l1;
  res.stage1_volume = b.volume;
  res.stages.push_back(StageSummary{1, l1, 1, 0.0, b.volume, 0.0});

  bool done = removal(b, feed_conc) >= plan.target;
  if (plan.adaptive) {
    for (int m = 2; !done && m <= plan.max_stages && b.volume > 0.0; ++m)
      b = run_stage(m, 1, plan.max_reuse, b, shape, feed, cfg, feed_conc, plan.target, res, done);
  } else {
    const int n = static_cast<int>(plan.stages.size());
    for (int m = 2; !done && m <= n && b.volume > 0.0; ++m) {
      const auto& s = plan.stages[m - 1];
      int cap = s.max_passes > 0 ? s.max_passes : (m == n ? plan.max_reuse : 1);
      b = run_stage(m, s.filters, cap, b, shape, feed, cfg, feed_conc, plan.target, res, done);
    }
  }

  res.final_batch = b;
  res.target_met = done;
  double total = 0.0;
  for (std::size_t i = 0; i < b.conc.size(); ++i) {
    res.Rbar.push_back(feed_conc[i] > 0.0 ? std::clamp(1.0 - b.conc[i] / feed_conc[i], 0.0, 1.0) : 0.0);
    total += b.conc[i];
  }
  for (double c : b.conc) res.purity.push_back(total > 0.0 ? c / total : 0.0);
  std::size_t t = b.conc.size() > 1 ? 1 : 0;
  res.yield_per_filter = b.conc[t] * b.volume / res.M;
  return res;
}

std::vector<SweepRow> sweep_stage_ratios(const std::vector<std::vector<StageSpec>>& candidates,
                                         const ShapeFunction& shape, const FeedSpec& feed,
                                         const SimConfig& cfg, double target) {
  if (candidates.empty()) throw Error(ErrorKind::InvalidInput, "empty candidate list");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    StagePlan plan;
    plan.stages = candidates[i];
    plan.target = target;
    rows.push_back(SweepRow{i, candidates[i], run_protocol(plan, shape, feed, cfg)});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.result.yield_per_filter > b.result.yield_per_filter;
  });
  return rows;
}

std::string stage_label(const std::vector<StageSpec>& stages) {
  std::ostringstream os;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (i) os << ',';
    os << stages[i].filters;
    if (stages[i].max_passes > 0) os << '^' << stages[i].max_passes;
  }
  return os.str();
}

std::vector<StageSpec> parse_stage_label(const std::string& label) {
  std::vector<StageSpec> out;
  std::istringstream is(label);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
    StageSpec s;
    auto caret = tok.find('^');
    try {
      std::size_t used = 0;
      s.filters = std::stoi(tok.substr(0, caret), &used);
      if (used != (caret == std::string::npos ? tok.size() : caret)) throw std::invalid_argument(tok);
      if (caret != std::string::npos) {
        std::string rest = tok.substr(caret + 1);
        s.max_passes = std::stoi(rest, &used);
        if (used != rest.size()) throw std::invalid_argument(tok);
      }
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidInput, "bad stage token '" + tok + "'");
    }
    if (s.filters < 1 || s.max_passes < 0) throw Error(ErrorKind::InvalidInput, "bad stage token '" + tok + "'");
    out.push_back(s);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidInput, "empty stage label");
  return out;
}

}  // namespace poreflow
