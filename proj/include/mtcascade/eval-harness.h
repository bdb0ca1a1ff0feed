// include/mtcascade/eval-harness.h

// Copyright 2026  mtcascade authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef MTCASCADE_EVAL_HARNESS_H_
#define MTCASCADE_EVAL_HARNESS_H_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mtcascade/mt-sad.h"

namespace mtcascade {

struct EditCounts {
  int32_t substitutions = 0, deletions = 0, insertions = 0;
  int32_t total() const { return substitutions + deletions + insertions; }
  EditCounts &operator+=(const EditCounts &o);
  bool operator==(const EditCounts &o) const = default;
};

// Levenshtein alignment of hyp against ref. Among minimal alignments the one
// with the most substitutions is chosen.
EditCounts EditDistance(std::span<const int32_t> ref,
                        std::span<const int32_t> hyp);

struct AssignmentResult {
  // permutation[h] is the reference slot matched to hypothesis slot h after
  // both lists are padded with empties to a common length.
  std::vector<int32_t> permutation;
  int32_t total_edits = 0;
  EditCounts counts;
  std::vector<EditCounts> per_pair;  // indexed by hypothesis slot
  int32_t reference_tokens = 0;
};

// Minimum total edit distance over all hypothesis-to-reference matchings.
AssignmentResult AssignAndScore(const std::vector<TokenSequence> &refs,
                                const std::vector<TokenSequence> &hyps);

struct SetScore {
  EditCounts counts;
  int32_t reference_tokens = 0;
  int32_t utterances = 0;
  // Undefined when there are no reference tokens.
  std::optional<double> Wer() const;
};

enum class EvalMode { kSt, kMt, kConditioned };
const char *EvalModeName(EvalMode mode);
EvalMode ParseEvalMode(const std::string &s);

struct UtteranceScore {
  std::string id;
  UtteranceKind kind = UtteranceKind::kSingle;
  std::vector<TokenSequence> hyps;
  AssignmentResult assignment;
  std::optional<OverlapDecision> dispatch;
  std::optional<double> estimated_overlap_s;
  double actual_overlap_s = 0.0;
};

struct SadScore {
  int64_t frames = 0, correct = 0, positives = 0;
  double Accuracy() const;
  double MajorityBaseline() const;
};

struct WerReport {
  std::string model;
  EvalMode mode = EvalMode::kMt;
  SetScore single, overlap;
  // dispatch[actual][decided], kinds indexed single = 0, overlapped = 1.
  int32_t dispatch[2][2] = {{0, 0}, {0, 0}};
  std::optional<SadScore> sad;
  std::vector<UtteranceScore> utterances;  // sorted by id

  // Unweighted mean of the two set WERs.
  std::optional<double> Average() const;
  std::optional<double> DispatchAccuracy() const;
  // Pearson correlation of estimated vs actual overlap on overlapped items.
  std::optional<double> OverlapCorrelation() const;
  nlohmann::json ToJson() const;
};

struct EvalOptions {
  std::string model_name = "model";
  double frame_rate = 100.0 / 3.0;
  double threshold_s = 0.5;
};

// Decodes every example under `mode`. A probe is required for conditioned
// mode; when given in other modes it is still used for SAD scoring.
WerReport Evaluate(const ModelBundle &bundle, const ProbeModel *probe,
                   const std::vector<Example> &examples, EvalMode mode,
                   const EvalOptions &opts = {});

double PearsonCorrelation(std::span<const double> x, std::span<const double> y);

// Rows for every overlapped utterance with an estimate:
// utt_id,estimated_overlap_s,actual_overlap_s
void WriteScatterCsv(const WerReport &report, std::ostream &os);
void WriteGnuplotScript(const std::string &csv_path, const std::string &png_path,
                        std::ostream &os);

// One row per model, SingleSpkr / Overlap / Ave. columns.
nlohmann::json TableJson(const std::vector<WerReport> &reports);

}  // namespace mtcascade

#endif  // MTCASCADE_EVAL_HARNESS_H_
