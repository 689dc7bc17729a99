#pragma once

#include <string>
#include <vector>

#include "poreflow/simulator.hpp"

namespace poreflow {

struct Batch {
  double volume = 0.0;
  std::vector<double> conc;
};

struct FilterInstance {
  int stage = 1;
  int index = 0;
  ShapeFunction shape;
  PoreProfile profile;
  std::vector<double> clean;
  double u_clean = 0.0;
  int uses = 0;
  bool exhausted = false;
  double processed = 0.0;
  double discarded = 0.0;
};

FilterInstance make_filter(const ShapeFunction& shape, int stage, int index, const SimConfig& cfg);

// Number of filters at one stage and how many passes each may take.
// max_passes = 0 means one pass at an intermediate stage and reuse until the
// target is met or the filter exhausts at the last stage.
struct StageSpec {
  int filters = 1;
  int max_passes = 0;
};

struct StagePlan {
  double R = 0.5;  // removal threshold the stage filter was designed for (informational)
  std::vector<StageSpec> stages;
  bool adaptive = false;  // spawn single-filter stages until the target is met
  double target = 0.99;   // Rbar_1 against the original feed
  int max_stages = 64;    // adaptive guard
  int max_reuse = 1000;

  void validate() const;
};

struct PassResult {
  Batch outflow;
  double discarded = 0.0;
};

struct StageSummary {
  int stage = 1;
  int filters = 0;
  int passes = 0;  // passes taken by each filter of the stage
  double volume_in = 0.0;
  double volume_out = 0.0;
  double discarded = 0.0;
};

struct MultiStageResult {
  std::vector<FilterInstance> ledger;
  std::vector<StageSummary> stages;
  Batch final_batch;
  int M = 0;
  double stage1_volume = 0.0;
  double discarded = 0.0;
  std::vector<double> Rbar;
  std::vector<double> purity;
  double yield_per_filter = 0.0;
  bool target_met = false;
};

Batch run_stage1_filter(FilterInstance& filter, const FeedSpec& feed, const SimConfig& cfg);

PassResult run_pass(FilterInstance& filter, const Batch& inflow, const FeedSpec& feed, const SimConfig& cfg);

MultiStageResult run_protocol(const StagePlan& plan, const ShapeFunction& shape, const FeedSpec& feed,
                              const SimConfig& cfg);

struct SweepRow {
  std::size_t candidate = 0;  // position in the input list
  std::vector<StageSpec> stages;
  MultiStageResult result;
};

// Runs every candidate and returns rows ranked by yield per filter (descending, stable).
std::vector<SweepRow> sweep_stage_ratios(const std::vector<std::vector<StageSpec>>& candidates,
                                         const ShapeFunction& shape, const FeedSpec& feed,
                                         const SimConfig& cfg, double target = 0.99);

// "18,6,2,1^3" style label; a superscript is only printed for capped stages
std::string stage_label(const std::vector<StageSpec>& stages);
std::vector<StageSpec> parse_stage_label(const std::string& label);

}  // namespace poreflow
