#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sonder/analytics.hpp"
#include "sonder/stats.hpp"

namespace sonder {

enum class Arm { Treatment, Control };

std::string_view to_string(Arm arm) noexcept;
Arm parse_arm(std::string_view text);

/// Deterministic Bernoulli(0.5) draw keyed by (seed, participant id).
Arm draw_arm(std::uint64_t seed, std::string_view participant_id);

/// Remembers every assignment so repeated calls for an id return the same
/// arm. With a backing file, assignments survive restarts (one `id,arm` line
/// each, appended). Thread-safe.
class ArmAssigner {
 public:
  explicit ArmAssigner(std::uint64_t seed, std::optional<std::filesystem::path> backing_file = std::nullopt);

  Arm assign(const std::string& participant_id);
  std::optional<Arm> find(const std::string& participant_id) const;
  std::map<Arm, std::size_t> counts() const;
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
  std::optional<std::filesystem::path> backing_file_;
  mutable std::mutex mu_;
  std::map<std::string, Arm> assigned_;
};

// ---------------------------------------------------------------------------
// Surveys

struct SurveyItem {
  std::string text;
  std::string dimension;
  bool reverse_coded = false;
};

struct SurveyScale {
  std::string name;
  std::string version;
  std::vector<SurveyItem> items;
  int min_answer = -3;
  int max_answer = 3;
  /// Set for shipped placeholders whose item text must come from the operator.
  bool placeholder = false;

  std::vector<std::string> dimensions() const;

  static SurveyScale from_json(std::string_view json_text);
  static SurveyScale load(const std::filesystem::path& path);
  std::string to_json() const;
};

/// The 17-item open-minded thinking scale: fact resistance (5 items, first
/// three reverse coded), dogmatism (6, all reverse coded), liberalism (3,
/// none reversed) and belief personification (3, all reverse coded).
const SurveyScale& aot17_scale();

inline constexpr std::string_view kFactResistance = "fact_resistance";
inline constexpr std::string_view kDogmatism = "dogmatism";
inline constexpr std::string_view kLiberalism = "liberalism";
inline constexpr std::string_view kBeliefPersonification = "belief_personification";

struct SurveyResponse {
  std::string participant_id;
  std::string scale_name;
  std::vector<int> answers;
};

struct SurveyScore {
  double overall = 0.0;
  std::map<std::string, double> by_dimension;
};

/// Reverse-coded answers contribute their negation; dimension and overall
/// scores are means of the effective item scores. Throws InvalidResponse
/// (message names the offending item index) on length or range errors.
SurveyScore score_survey(const SurveyResponse& response, const SurveyScale& scale);

// ---------------------------------------------------------------------------
// Participants, balance, outcomes

inline const std::vector<std::string>& balance_covariates() {
  static const std::vector<std::string> kNames{"white", "female", "age",      "college",
                                               "income_60k", "urban", "democrat", "aot7_pre"};
  return kNames;
}

struct Participant {
  std::string id;
  std::map<std::string, double> covariates;  // keys from balance_covariates()
  Arm arm = Arm::Control;
};

struct BalanceRow {
  std::string covariate;
  double treatment_mean = 0.0;
  double control_mean = 0.0;
  double difference = 0.0;
  double std_error = 0.0;
  double p_value = 1.0;
  std::string stars;
};

/// Difference in group means with SE sqrt(s_t^2/n_t + s_c^2/n_c); stars from
/// a two-sided normal test at 0.01/0.05/0.10. aot7_pre is standardized across
/// the pooled participants first.
std::vector<BalanceRow> balance_table(std::span<const Participant> participants);

inline const std::vector<std::string>& search_topics() {
  static const std::vector<std::string> kTopics{
      "Patriotism in my country today", "Openness to immigration", "Abortion and its legal status",
      "Traditional values in society today", "Laws around gun ownership"};
  return kTopics;
}

struct ClickEvent {
  std::string participant_id;
  std::string topic;
  std::string query;
  int rank_clicked = 1;
  double completeness_of_result = 0.0;  // 0-100 reporting scale
  std::string timestamp;                // RFC 3339, UTC
};

struct ClickOutcome {
  int max_rank = 0;
  int n_clicked = 0;
  std::optional<double> mean_click_completeness;
};

/// Furthest rank, click count and mean clicked completeness across every
/// query and topic. Zero clicks give (0, 0, missing).
ClickOutcome compute_o2(std::span<const ClickEvent> clicks);

struct OutcomeRecord {
  std::string participant_id;
  Arm arm = Arm::Control;
  double o1_overall = 0.0;
  std::map<std::string, double> o1_dimensions;
  int o2_max_rank = 0;
  int o2_n_clicked = 0;
  std::optional<double> o2_mean_click_completeness;
};

/// Joins participants with their clicks and post-test AOT17 responses.
/// Participants without a post-test response are skipped. With
/// `standardize_o1`, overall and dimension scores are z-scored across the
/// participants that remain.
std::vector<OutcomeRecord> compute_outcomes(std::span<const Participant> participants,
                                            std::span<const ClickEvent> clicks,
                                            std::span<const SurveyResponse> post_surveys, const SurveyScale& scale,
                                            bool standardize_o1 = true);

struct EffectEstimate {
  std::string outcome;
  bool with_controls = false;
  double beta = 0.0;
  double std_error = 0.0;
  double p_value = 1.0;
  std::size_t n_obs = 0;
  RegressionFit fit;
};

inline constexpr std::string_view kTreatmentTerm = "treatment";

/// Regresses the outcome on a treatment indicator, plus the given controls
/// when any are supplied. Missing outcomes drop the participant listwise.
EffectEstimate estimate_effect(std::string_view outcome_name, std::span<const std::optional<double>> outcomes,
                               std::span<const Arm> arms,
                               std::span<const std::map<std::string, double>> controls = {},
                               bool robust_se = false);

/// Every O1/O2 outcome, with and without the balance covariates as controls.
std::vector<EffectEstimate> estimate_all_effects(std::span<const OutcomeRecord> outcomes,
                                                 std::span<const Participant> participants);

// ---------------------------------------------------------------------------
// Simulation

struct AgentBehavior {
  /// Exponent of the truncated power law P(rank = r) ~ r^-alpha, r in 1..100.
  double rank_exponent = 1.1;
  int max_rank = 100;
  /// Mean shift of a treated participant's clicked ranks (hence of max rank).
  double treatment_rank_shift = 0.0;
  /// Shift of treated clicks' completeness, in reporting points (0-100).
  double completeness_preference = 0.0;
  /// Extra clicks per treated participant, in expectation.
  double treatment_click_shift = 0.0;
  /// Treatment shift of each AOT17 dimension score, in pooled SD units.
  std::map<std::string, double> dimension_shift_sd;
  int queries_per_topic_min = 1;
  int queries_per_topic_max = 3;
  double extra_clicks_per_query = 0.8;
  /// Correlation between the pretest score and each latent dimension.
  double pretest_correlation = 0.5;
  /// Reject and redraw assignments until exactly this many are treated.
  std::optional<std::size_t> treatment_count;

  void validate() const;
};

struct SimulatedDataset {
  std::vector<Participant> participants;
  std::vector<ClickEvent> clicks;
  std::vector<SurveyResponse> surveys;
  std::uint64_t assignment_seed = 0;
};

SimulatedDataset simulate_agents(std::size_t n, const AgentBehavior& behavior, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV export

std::string participants_csv(std::span<const Participant> participants);
std::string clicks_csv(std::span<const ClickEvent> clicks);
std::string outcomes_csv(std::span<const OutcomeRecord> outcomes);
std::string effects_csv(std::span<const EffectEstimate> effects);
std::string balance_csv(std::span<const BalanceRow> rows);

}  // namespace sonder
