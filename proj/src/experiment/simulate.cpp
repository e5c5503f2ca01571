#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "sonder/error.hpp"
#include "sonder/experiment.hpp"

namespace sonder {

namespace {

constexpr double kItemNoiseSd = 1.0;

// Inverse-CDF sampler for P(r) ~ r^-alpha on 1..max_rank.
class PowerLawRanks {
 public:
  PowerLawRanks(double alpha, int max_rank) {
    cdf_.reserve(static_cast<std::size_t>(max_rank));
    double total = 0.0;
    for (int r = 1; r <= max_rank; ++r) {
      total += std::pow(static_cast<double>(r), -alpha);
      cdf_.push_back(total);
    }
    for (double& c : cdf_) c /= total;
  }

  template <typename Gen>
  int operator()(Gen& gen) const {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf_.begin(), std::ssize(cdf_) - 1)) + 1;
  }

 private:
  std::vector<double> cdf_;
};

// floor(x) plus a Bernoulli draw on the fractional part, so the mean is x.
template <typename Gen>
int randomized_round(double x, Gen& gen) {
  const double base = std::floor(x);
  const double frac = x - base;
  return static_cast<int>(base) + (std::bernoulli_distribution(frac)(gen) ? 1 : 0);
}

std::string timestamp(std::size_t participant, std::size_t click) {
  // Sessions start every 31 minutes from 2023-03-01T00:00:00Z.
  const std::size_t total = participant * 1860 + click * 7;
  const std::size_t day = total / 86400, rem = total % 86400;
  char buf[32];
  std::snprintf(buf, sizeof buf, "2023-03-%02zuT%02zu:%02zu:%02zuZ", 1 + day % 28, rem / 3600, (rem % 3600) / 60,
                rem % 60);
  return buf;
}

}  // namespace

void AgentBehavior::validate() const {
  if (!(rank_exponent > 0.0)) throw Error(ErrorCode::InvalidConfig, "rank_exponent must be positive");
  if (max_rank < 2) throw Error(ErrorCode::InvalidConfig, "max_rank must be >= 2");
  if (!(treatment_rank_shift >= 0.0) || treatment_rank_shift >= max_rank - 1) {
    throw Error(ErrorCode::InvalidConfig, "treatment_rank_shift must lie in [0, max_rank - 1)");
  }
  if (!(completeness_preference >= 0.0 && completeness_preference <= 60.0)) {
    throw Error(ErrorCode::InvalidConfig, "completeness_preference must lie in [0, 60] points");
  }
  if (!(treatment_click_shift >= 0.0)) throw Error(ErrorCode::InvalidConfig, "treatment_click_shift must be >= 0");
  if (queries_per_topic_min < 1 || queries_per_topic_max < queries_per_topic_min) {
    throw Error(ErrorCode::InvalidConfig, "bad queries-per-topic range");
  }
  if (!(extra_clicks_per_query >= 0.0)) throw Error(ErrorCode::InvalidConfig, "extra_clicks_per_query must be >= 0");
  if (!(pretest_correlation > -1.0 && pretest_correlation < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "pretest_correlation must lie in (-1, 1)");
  }
  const auto dims = aot17_scale().dimensions();
  for (const auto& [dim, shift] : dimension_shift_sd) {
    if (std::find(dims.begin(), dims.end(), dim) == dims.end()) {
      throw Error(ErrorCode::InvalidConfig, "unknown AOT17 dimension '" + dim + "'");
    }
    if (!(std::abs(shift) < 1.5)) throw Error(ErrorCode::InvalidConfig, "dimension shift must be below 1.5 SD");
  }
}

SimulatedDataset simulate_agents(std::size_t n, const AgentBehavior& behavior, std::uint64_t seed) {
  behavior.validate();
  if (n < 2) throw Error(ErrorCode::InvalidConfig, "simulate at least 2 agents");
  if (behavior.treatment_count && *behavior.treatment_count > n) {
    throw Error(ErrorCode::InvalidConfig, "treatment_count exceeds the number of agents");
  }

  SimulatedDataset data;
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "P%05zu", i + 1);
    ids.emplace_back(buf);
  }

  // Arms: fresh assignment seeds until the requested split comes up.
  std::vector<Arm> arms(n);
  std::uint64_t assignment_seed = seed;
  for (int attempt = 0;; ++attempt) {
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      arms[i] = draw_arm(assignment_seed, ids[i]);
      treated += arms[i] == Arm::Treatment ? 1 : 0;
    }
    if (!behavior.treatment_count || treated == *behavior.treatment_count) break;
    if (attempt > 100000) throw Error(ErrorCode::InvalidConfig, "requested treatment split is unreachable");
    assignment_seed = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(attempt + 1);
  }
  data.assignment_seed = assignment_seed;

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto bern = [&](double p) { return std::bernoulli_distribution(p)(gen) ? 1.0 : 0.0; };

  const auto& scale = aot17_scale();
  const auto dims = scale.dimensions();
  // Latent shift that moves a dimension score by the requested pooled-SD
  // amount: score SD is sqrt(1 + item noise / k), and pooling the two arms
  // adds shift^2/4 to the variance.
  std::map<std::string, double> latent_shift;
  for (const auto& dim : dims) {
    const auto k = static_cast<double>(std::count_if(scale.items.begin(), scale.items.end(),
                                                     [&](const SurveyItem& it) { return it.dimension == dim; }));
    const double score_sd = std::sqrt(1.0 + (kItemNoiseSd * kItemNoiseSd + 1.0 / 12.0) / k);
    const auto it = behavior.dimension_shift_sd.find(dim);
    const double s = it == behavior.dimension_shift_sd.end() ? 0.0 : it->second;
    latent_shift[dim] = s * score_sd / std::sqrt(1.0 - s * s / 4.0);
  }

  const int rank_headroom = static_cast<int>(std::ceil(behavior.treatment_rank_shift));
  const PowerLawRanks ranks(behavior.rank_exponent, behavior.max_rank - rank_headroom);
  const double completeness_hi = 90.0 - behavior.completeness_preference;
  const double rho = behavior.pretest_correlation;

  for (std::size_t i = 0; i < n; ++i) {
    const bool treated = arms[i] == Arm::Treatment;
    Participant p;
    p.id = ids[i];
    p.arm = arms[i];
    p.covariates["white"] = bern(0.675);
    p.covariates["female"] = bern(0.46);
    p.covariates["age"] = std::max(18.0, std::round(28.3 + 9.0 * normal(gen)));
    p.covariates["college"] = bern(0.45);
    p.covariates["income_60k"] = bern(0.57);
    p.covariates["urban"] = bern(0.835);
    p.covariates["democrat"] = bern(0.56);
    const double pretest = normal(gen);
    p.covariates["aot7_pre"] = pretest;

    // Post-test AOT17 answers from per-dimension latents.
    std::map<std::string, double> latent;
    for (const auto& dim : dims) {
      latent[dim] = rho * pretest + std::sqrt(1.0 - rho * rho) * normal(gen) + (treated ? latent_shift[dim] : 0.0);
    }
    SurveyResponse survey{p.id, scale.name, {}};
    for (const auto& item : scale.items) {
      const double raw = latent[item.dimension] + kItemNoiseSd * normal(gen);
      const int effective = static_cast<int>(std::clamp(std::round(raw), -3.0, 3.0));
      survey.answers.push_back(item.reverse_coded ? -effective : effective);
    }
    data.surveys.push_back(std::move(survey));

    // Clicks: every rank of a treated agent moves by one participant-level shift.
    const int shift = treated ? randomized_round(behavior.treatment_rank_shift, gen) : 0;
    std::poisson_distribution<int> extra(behavior.extra_clicks_per_query);
    std::uniform_real_distribution<double> completeness(10.0, completeness_hi);
    const double bonus = treated ? behavior.completeness_preference : 0.0;
    std::size_t click_index = 0;
    int furthest = 0;
    for (const auto& topic : search_topics()) {
      const int n_queries =
          std::uniform_int_distribution<int>(behavior.queries_per_topic_min, behavior.queries_per_topic_max)(gen);
      for (int q = 0; q < n_queries; ++q) {
        const std::string query = topic + " #" + std::to_string(q + 1);
        const int n_clicks = 1 + extra(gen);
        for (int c = 0; c < n_clicks; ++c) {
          const int rank = ranks(gen) + shift;
          furthest = std::max(furthest, rank);
          data.clicks.push_back({p.id, topic, query, rank, completeness(gen) + bonus, timestamp(i, click_index++)});
        }
      }
    }
    // Extra clicks land at or above the furthest rank already reached, so
    // they move the click count without moving the max rank.
    if (treated && behavior.treatment_click_shift > 0.0) {
      const int more = randomized_round(behavior.treatment_click_shift, gen);
      for (int c = 0; c < more; ++c) {
        const auto& topic = search_topics()[static_cast<std::size_t>(c) % search_topics().size()];
        const int rank = std::uniform_int_distribution<int>(1, furthest)(gen);
        data.clicks.push_back(
            {p.id, topic, topic + " #1", rank, completeness(gen) + bonus, timestamp(i, click_index++)});
      }
    }
    data.participants.push_back(std::move(p));
  }
  return data;
}

}  // namespace sonder
