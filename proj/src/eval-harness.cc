// src/eval-harness.cc

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

#include "mtcascade/eval-harness.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mtcascade {

EditCounts &EditCounts::operator+=(const EditCounts &o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  return *this;
}

EditCounts EditDistance(std::span<const int32_t> ref,
                        std::span<const int32_t> hyp) {
  const size_t R = ref.size(), H = hyp.size();
  // Cost first, then fewer ins+del (i.e. more substitutions) on ties.
  struct Cell {
    int32_t cost = 0, indels = 0;
    EditCounts counts;
    bool operator<(const Cell &o) const {
      return cost != o.cost ? cost < o.cost : indels < o.indels;
    }
  };
  std::vector<Cell> prev(H + 1), cur(H + 1);
  for (size_t j = 1; j <= H; ++j) {
    prev[j] = prev[j - 1];
    ++prev[j].cost, ++prev[j].indels, ++prev[j].counts.insertions;
  }
  for (size_t i = 1; i <= R; ++i) {
    cur[0] = prev[0];
    ++cur[0].cost, ++cur[0].indels, ++cur[0].counts.deletions;
    for (size_t j = 1; j <= H; ++j) {
      Cell diag = prev[j - 1];
      if (ref[i - 1] != hyp[j - 1]) ++diag.cost, ++diag.counts.substitutions;
      Cell del = prev[j];
      ++del.cost, ++del.indels, ++del.counts.deletions;
      Cell ins = cur[j - 1];
      ++ins.cost, ++ins.indels, ++ins.counts.insertions;
      Cell best = diag;
      if (del < best) best = del;
      if (ins < best) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }
  return prev[H].counts;
}

AssignmentResult AssignAndScore(const std::vector<TokenSequence> &refs,
                                const std::vector<TokenSequence> &hyps) {
  const size_t n = std::max(refs.size(), hyps.size());
  static const TokenSequence kEmpty;
  auto ref_at = [&](size_t i) -> const TokenSequence & {
    return i < refs.size() ? refs[i] : kEmpty;
  };
  auto hyp_at = [&](size_t i) -> const TokenSequence & {
    return i < hyps.size() ? hyps[i] : kEmpty;
  };
  std::vector<std::vector<EditCounts>> cost(n, std::vector<EditCounts>(n));
  for (size_t h = 0; h < n; ++h)
    for (size_t r = 0; r < n; ++r) cost[h][r] = EditDistance(ref_at(r), hyp_at(h));

  AssignmentResult best;
  for (const auto &r : refs) best.reference_tokens += static_cast<int32_t>(r.size());
  std::vector<int32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  bool first = true;
  do {
    int32_t total = 0;
    for (size_t h = 0; h < n; ++h) total += cost[h][perm[h]].total();
    if (first || total < best.total_edits) {
      first = false;
      best.total_edits = total;
      best.permutation = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  best.per_pair.resize(n);
  for (size_t h = 0; h < n; ++h) {
    best.per_pair[h] = cost[h][best.permutation[h]];
    best.counts += best.per_pair[h];
  }
  return best;
}

std::optional<double> SetScore::Wer() const {
  if (reference_tokens == 0) return std::nullopt;
  return 100.0 * counts.total() / reference_tokens;
}

const char *EvalModeName(EvalMode mode) {
  switch (mode) {
    case EvalMode::kSt: return "st";
    case EvalMode::kMt: return "mt";
    case EvalMode::kConditioned: return "conditioned";
  }
  return "unknown";
}

EvalMode ParseEvalMode(const std::string &s) {
  if (s == "st") return EvalMode::kSt;
  if (s == "mt") return EvalMode::kMt;
  if (s == "conditioned") return EvalMode::kConditioned;
  throw ConfigError("unknown evaluation mode '" + s + "'");
}

double SadScore::Accuracy() const {
  return frames ? static_cast<double>(correct) / frames : 0.0;
}

double SadScore::MajorityBaseline() const {
  return frames ? static_cast<double>(std::max(positives, frames - positives)) /
                      frames
                : 0.0;
}

std::optional<double> WerReport::Average() const {
  auto a = single.Wer(), b = overlap.Wer();
  if (!a || !b) return std::nullopt;
  return 0.5 * (*a + *b);
}

std::optional<double> WerReport::DispatchAccuracy() const {
  int32_t total = dispatch[0][0] + dispatch[0][1] + dispatch[1][0] + dispatch[1][1];
  if (total == 0) return std::nullopt;
  return static_cast<double>(dispatch[0][0] + dispatch[1][1]) / total;
}

std::optional<double> WerReport::OverlapCorrelation() const {
  std::vector<double> est, act;
  for (const auto &u : utterances)
    if (u.kind == UtteranceKind::kOverlapped && u.estimated_overlap_s) {
      est.push_back(*u.estimated_overlap_s);
      act.push_back(u.actual_overlap_s);
    }
  if (est.size() < 2) return std::nullopt;
  double r = PearsonCorrelation(est, act);
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

namespace {

nlohmann::json OptionalJson(const std::optional<double> &v) {
  return v ? nlohmann::json(*v) : nlohmann::json("n/a");
}

nlohmann::json SetJson(const SetScore &s) {
  return {{"substitutions", s.counts.substitutions},
          {"deletions", s.counts.deletions},
          {"insertions", s.counts.insertions},
          {"reference_tokens", s.reference_tokens},
          {"utterances", s.utterances},
          {"WER", OptionalJson(s.Wer())}};
}

}  // namespace

nlohmann::json WerReport::ToJson() const {
  nlohmann::json j = {{"model", model},
                      {"mode", EvalModeName(mode)},
                      {"unit", "token"},
                      {"SingleSpkr", SetJson(single)},
                      {"Overlap", SetJson(overlap)},
                      {"Ave.", OptionalJson(Average())}};
  if (mode == EvalMode::kConditioned) {
    j["dispatch"] = {{"single_as_single", dispatch[0][0]},
                     {"single_as_overlapped", dispatch[0][1]},
                     {"overlapped_as_single", dispatch[1][0]},
                     {"overlapped_as_overlapped", dispatch[1][1]},
                     {"accuracy", OptionalJson(DispatchAccuracy())}};
  }
  if (sad) {
    j["sad"] = {{"frames", sad->frames},
                {"frame_accuracy", sad->Accuracy()},
                {"majority_baseline", sad->MajorityBaseline()},
                {"overlap_correlation", OptionalJson(OverlapCorrelation())}};
  }
  return j;
}

WerReport Evaluate(const ModelBundle &bundle, const ProbeModel *probe,
                   const std::vector<Example> &examples, EvalMode mode,
                   const EvalOptions &opts) {
  if (mode == EvalMode::kConditioned && !probe)
    throw ConfigError("conditioned evaluation needs a probe");
  WerReport rep;
  rep.model = opts.model_name;
  rep.mode = mode;
  const bool use_probe = probe && bundle.wiring().HasMaskEncoder() &&
                         bundle.wiring().num_channels == 2;
  if (use_probe) rep.sad = SadScore{};

  std::vector<size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return examples[a].id < examples[b].id;
  });

  for (size_t idx : order) {
    const Example &ex = examples[idx];
    UtteranceScore u;
    u.id = ex.id;
    u.kind = ex.kind;
    u.actual_overlap_s = ex.overlap_s;
    std::vector<ActivityTrack> tracks;
    switch (mode) {
      case EvalMode::kSt:
        u.hyps = {DecodeSt(ex.features, bundle)};
        break;
      case EvalMode::kMt:
        u.hyps = DecodeMt(ex.features, bundle);
        break;
      case EvalMode::kConditioned: {
        ConditionedResult c = ConditionedDecode(ex.features, bundle, *probe,
                                                opts.frame_rate, opts.threshold_s);
        u.hyps = std::move(c.outputs);
        u.dispatch = c.mode;
        u.estimated_overlap_s = c.estimate.overlap_s;
        tracks = std::move(c.tracks);
        int k = ex.kind == UtteranceKind::kOverlapped;
        ++rep.dispatch[k][c.mode == OverlapDecision::kOverlapped];
        break;
      }
    }
    if (use_probe) {
      if (tracks.empty())
        for (int32_t m = 1; m <= 2; ++m)
          tracks.push_back(InferActivity(bundle, *probe, ex.features,
                                         ChannelId(m, 2), opts.frame_rate));
      if (!u.estimated_overlap_s)
        u.estimated_overlap_s =
            EstimateOverlap(tracks[0], tracks[1], probe->theta, opts.threshold_s)
                .overlap_s;
      // Frame accuracy is scored on overlapped items, where both channels
      // carry speech.
      if (ex.kind == UtteranceKind::kOverlapped) {
        for (int32_t m = 0; m < 2; ++m) {
          const ActivityTrack &tr = tracks[m];
          if (tr.size() != ex.activity.rows())
            throw GeometryError("activity/frame length mismatch for " + ex.id);
          for (int32_t t = 0; t < tr.size(); ++t) {
            bool label = ex.activity(t, m) > 0.5;
            rep.sad->positives += label;
            rep.sad->correct += (tr.probs[t] > probe->theta) == label;
            ++rep.sad->frames;
          }
        }
      }
    }
    std::vector<TokenSequence> refs;
    for (const auto &t : ex.transcripts)
      if (!t.empty()) refs.push_back(t);
    u.assignment = AssignAndScore(refs, u.hyps);
    SetScore &set = ex.kind == UtteranceKind::kOverlapped ? rep.overlap : rep.single;
    set.counts += u.assignment.counts;
    set.reference_tokens += u.assignment.reference_tokens;
    ++set.utterances;
    rep.utterances.push_back(std::move(u));
  }
  return rep;
}

double PearsonCorrelation(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw GeometryError("correlation needs equal, non-empty samples");
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

void WriteScatterCsv(const WerReport &report, std::ostream &os) {
  os << "utt_id,estimated_overlap_s,actual_overlap_s\n";
  for (const auto &u : report.utterances)
    if (u.kind == UtteranceKind::kOverlapped && u.estimated_overlap_s)
      os << u.id << ',' << *u.estimated_overlap_s << ',' << u.actual_overlap_s
         << '\n';
}

void WriteGnuplotScript(const std::string &csv_path, const std::string &png_path,
                        std::ostream &os) {
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 640,480\n"
     << "set output '" << png_path << "'\n"
     << "set xlabel 'actual overlap (s)'\n"
     << "set ylabel 'estimated overlap (s)'\n"
     << "set key off\n"
     << "plot '" << csv_path << "' every ::1 using 3:2 with points pt 7 ps 0.6, "
     << "x with lines lt 0\n";
}

nlohmann::json TableJson(const std::vector<WerReport> &reports) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto &r : reports)
    rows.push_back({{"model", r.model},
                    {"mode", EvalModeName(r.mode)},
                    {"SingleSpkr", OptionalJson(r.single.Wer())},
                    {"Overlap", OptionalJson(r.overlap.Wer())},
                    {"Ave.", OptionalJson(r.Average())}});
  return {{"unit", "token"}, {"rows", rows}};
}

}  // namespace mtcascade
