#include "bogen/simulate.hpp"

#include "bogen/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>

namespace bogen {

using nlohmann::json;

std::string to_string(UserPolicy p) { return p == UserPolicy::pbo_user ? "pbo_user" : "random_user"; }

UserPolicy parse_user_policy(const std::string& s) {
  if (s == "pbo_user") return UserPolicy::pbo_user;
  if (s == "random_user") return UserPolicy::random_user;
  throw InvalidArgument("unknown user policy: " + s);
}

SimulatedUser::SimulatedUser(LatentPoint2D target, double noise_temp, UserPolicy policy, std::uint64_t seed)
    : target_(target), noise_temp_(noise_temp), policy_(policy), rng_(seed) {
  if (!(noise_temp > 0.0)) throw InvalidArgument("SimulatedUser: noise_temp must be positive");
}

std::optional<std::size_t> SimulatedUser::choose(const std::vector<Card>& candidates) {
  if (candidates.empty()) return std::nullopt;
  if (policy_ == UserPolicy::random_user) {
    return std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng_);
  }
  std::vector<double> logits(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) logits[i] = -distance(candidates[i].latent, target_) / noise_temp_;
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logits[i] - top);
  return std::discrete_distribution<std::size_t>(w.begin(), w.end())(rng_);
}

void SimulationOptions::validate() const {
  if (rounds < 1) throw ConfigError("simulation: rounds must be >= 1");
  if (!(noise_temp > 0.0)) throw ConfigError("simulation: noise_temp must be positive");
  session.validate();
  analysis.clustering.validate();
}

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double mean_distance(const std::vector<Card>& cards, const LatentPoint2D& target) {
  double t = 0.0;
  for (const Card& c : cards) t += distance(c.latent, target);
  return t / static_cast<double>(cards.size());
}

} // namespace

SimulatedSession run_simulated_session(std::shared_ptr<const Artifacts> artifacts, Mode mode, std::uint64_t seed,
                                       const SimulationOptions& options) {
  options.validate();
  if (!artifacts || artifacts->corpus.size() == 0) throw InvalidArgument("simulation: empty artifacts");

  std::mt19937_64 pick(mix(seed));
  const std::size_t ti = std::uniform_int_distribution<std::size_t>(0, artifacts->corpus.size() - 1)(pick);
  const ShapeExtrinsic& target_shape = artifacts->corpus.shapes[ti];
  if (target_shape.tags.empty()) throw InvalidData("simulation: target shape has no tags");
  const std::string tag = *target_shape.tags.begin();

  SessionConfig cfg = options.session;
  cfg.seed = seed;
  SimulatedSession out;
  out.session = std::make_unique<Session>("sim-" + to_string(mode) + "-" + std::to_string(seed), mode, artifacts, cfg);
  Session& s = *out.session;
  RunResult& r = out.result;
  r.seed = seed;
  r.mode = mode;
  r.target = cfg.acquisition.bounds.clamp(artifacts->corpus_latents[ti]);
  r.target_shape = target_shape.id;
  SimulatedUser user(r.target, options.noise_temp, options.policy, mix(seed ^ 0x5EEDULL));

  s.prompt_search({tag});
  for (std::size_t round = 1; round <= options.rounds; ++round) {
    const std::vector<Card> shown = s.displayed();
    std::vector<Card> candidates;
    for (const Card& c : shown) {
      if (!s.preferred().contains(c.id)) candidates.push_back(c);
    }
    const auto choice = user.choose(candidates);
    if (choice) s.mark_preferred(candidates[*choice].id);

    if (options.synth_every > 0 && round % options.synth_every == 0 && shown.size() >= 2) {
      std::vector<Card> near = shown;
      std::stable_sort(near.begin(), near.end(), [&](const Card& a, const Card& b) {
        return distance(a.latent, r.target) < distance(b.latent, r.target);
      });
      std::set<int> parts;
      std::bernoulli_distribution coin(0.5);
      for (int i = 0; i < kPartCount; ++i) {
        if (coin(user.rng())) parts.insert(i);
      }
      if (parts.empty()) parts.insert(0);
      s.select(near[0].id, true);
      s.select(near[1].id, false);
      s.synthesize(near[0].id, near[1].id, parts);
      ++r.syntheses;
    }

    CardPage page;
    if (mode == Mode::bogen) {
      if (!choice && s.added().empty()) {
        page = s.prompt_search({tag});
      } else {
        try {
          page = s.request_suggestions();
        } catch (const PreconditionFailed&) {
          page = s.prompt_search({tag});
        }
      }
    } else {
      page = s.prompt_search({tag});
    }
    if (!page.cards.empty()) {
      r.round_distance.push_back(mean_distance(page.cards, r.target));
    } else {
      r.round_distance.push_back(r.round_distance.empty() ? mean_distance(s.displayed(), r.target)
                                                          : r.round_distance.back());
    }
  }

  r.metrics = analyze_session(s.record(), options.analysis);
  r.counters = s.counters();
  r.state_hash = s.state_hash();
  return out;
}

PairedSummary paired_summary(const std::vector<RunResult>& runs) {
  PairedSummary p;
  std::size_t lower = 0, higher = 0, decreasing = 0, bogen_runs = 0;
  for (const RunResult& b : runs) {
    if (b.mode != Mode::bogen) continue;
    ++bogen_runs;
    if (b.round_distance.size() >= 2 && b.round_distance.back() < b.round_distance.front()) ++decreasing;
    const auto u = std::find_if(runs.begin(), runs.end(),
                                [&](const RunResult& x) { return x.mode == Mode::uionly && x.seed == b.seed; });
    if (u == runs.end()) continue;
    ++p.pairs;
    if (b.metrics.mean_uncertainty_series.back() < u->metrics.mean_uncertainty_series.back()) ++lower;
    if (b.metrics.mean_probability.value > u->metrics.mean_probability.value) ++higher;
  }
  if (p.pairs > 0) {
    p.lower_uncertainty = static_cast<double>(lower) / static_cast<double>(p.pairs);
    p.higher_probability = static_cast<double>(higher) / static_cast<double>(p.pairs);
  }
  if (bogen_runs > 0) p.distance_decreasing = static_cast<double>(decreasing) / static_cast<double>(bogen_runs);
  return p;
}

StudyReport run_study(std::shared_ptr<const Artifacts> artifacts, const std::vector<Mode>& modes, std::size_t seeds,
                      std::uint64_t first_seed, const SimulationOptions& options,
                      const std::optional<std::filesystem::path>& export_dir) {
  options.validate();
  if (seeds == 0) throw InvalidArgument("simulation: need at least one seed");
  if (export_dir) std::filesystem::create_directories(*export_dir);

  StudyReport report;
  report.options = options;
  const std::size_t total = modes.size() * seeds;
  report.runs.resize(total);
  std::vector<std::exception_ptr> errors(total);
  const auto n = static_cast<std::ptrdiff_t>(total);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      SimulatedSession sim = run_simulated_session(artifacts, modes[u / seeds], first_seed + u % seeds, options);
      if (export_dir) sim.session->write_export(*export_dir / (sim.session->id() + ".jsonl"));
      report.runs[u] = std::move(sim.result);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const RunResult& r : report.runs) {
    spdlog::info("simulate {} seed {}: final uncertainty {:.4f}, mean probability {:.4f}", to_string(r.mode), r.seed,
                 r.metrics.mean_uncertainty_series.back(), r.metrics.mean_probability.value);
  }
  const bool both = std::find(modes.begin(), modes.end(), Mode::bogen) != modes.end() &&
                    std::find(modes.begin(), modes.end(), Mode::uionly) != modes.end();
  if (both) report.paired = paired_summary(report.runs);
  return report;
}

json to_json(const RunResult& r) {
  return {{"seed", r.seed},
          {"mode", to_string(r.mode)},
          {"target", {r.target.z1, r.target.z2}},
          {"target_shape", r.target_shape},
          {"metrics", to_json(r.metrics)},
          {"round_distance", r.round_distance},
          {"fit_calls", r.counters.fit_calls},
          {"sample_calls", r.counters.sample_calls},
          {"syntheses", r.syntheses},
          {"state_hash", format_hash(r.state_hash)}};
}

namespace {

json mean_sd(const std::vector<double>& v) {
  if (v.empty()) return nullptr;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  return {{"mean", mean}, {"sd", sd}, {"n", v.size()}};
}

} // namespace

json to_json(const StudyReport& r) {
  const SimulationOptions& o = r.options;
  json options = {{"rounds", o.rounds},
                  {"synth_every", o.synth_every},
                  {"noise_temp", o.noise_temp},
                  {"policy", to_string(o.policy)},
                  {"session", to_json(o.session)},
                  {"epsilon", o.analysis.clustering.epsilon},
                  {"min_pts", o.analysis.clustering.min_pts},
                  {"per_session_epsilon", o.analysis.per_session_epsilon}};
  json runs = json::array();
  json aggregate = json::object();
  for (Mode mode : {Mode::bogen, Mode::uionly}) {
    std::vector<double> unc, prob, area, clusters;
    for (const RunResult& x : r.runs) {
      if (x.mode != mode) continue;
      unc.push_back(x.metrics.mean_uncertainty_series.back());
      prob.push_back(x.metrics.mean_probability.value);
      area.push_back(x.metrics.explored_area);
      clusters.push_back(static_cast<double>(x.metrics.cluster_count));
    }
    if (unc.empty()) continue;
    aggregate[to_string(mode)] = {{"mean_uncertainty", mean_sd(unc)},
                                  {"mean_probability", mean_sd(prob)},
                                  {"explored_area", mean_sd(area)},
                                  {"cluster_count", mean_sd(clusters)}};
  }
  for (const RunResult& x : r.runs) runs.push_back(to_json(x));
  json out = {{"format", "bogen-simulation"}, {"options", options}, {"runs", runs}, {"aggregate", aggregate}};
  if (r.paired) {
    out["paired"] = {{"pairs", r.paired->pairs},
                     {"bogen_lower_uncertainty", r.paired->lower_uncertainty},
                     {"bogen_higher_probability", r.paired->higher_probability},
                     {"bogen_distance_decreasing", r.paired->distance_decreasing}};
  }
  return out;
}

void write_report_json(const StudyReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FileError(path, "cannot open for writing");
  out << to_json(r).dump(2) << '\n';
}

void write_report_csv(const StudyReport& r, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FileError(path, "cannot open for writing");
  out.precision(12);
  out << "mode,seed,final_mean_uncertainty,mean_probability,explored_area,cluster_count,epsilon_used,"
         "first_round_distance,last_round_distance,fit_calls,sample_calls,syntheses,state_hash\n";
  for (const RunResult& x : r.runs) {
    out << to_string(x.mode) << ',' << x.seed << ',' << x.metrics.mean_uncertainty_series.back() << ','
        << x.metrics.mean_probability.value << ',' << x.metrics.explored_area << ',' << x.metrics.cluster_count << ','
        << x.metrics.epsilon_used << ',' << x.round_distance.front() << ',' << x.round_distance.back() << ','
        << x.counters.fit_calls << ',' << x.counters.sample_calls << ',' << x.syntheses << ','
        << format_hash(x.state_hash) << '\n';
  }
}

} // namespace bogen
