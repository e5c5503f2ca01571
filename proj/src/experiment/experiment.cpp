#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "sonder/embedding.hpp"
#include "sonder/error.hpp"
#include "sonder/experiment.hpp"

namespace sonder {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string quoted(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string_view to_string(Arm arm) noexcept { return arm == Arm::Treatment ? "treatment" : "control"; }

Arm parse_arm(std::string_view text) {
  if (text == "treatment") return Arm::Treatment;
  if (text == "control") return Arm::Control;
  throw Error(ErrorCode::InvalidInput, "unknown arm '" + std::string(text) + "'");
}

Arm draw_arm(std::uint64_t seed, std::string_view participant_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(fnv1a64(participant_id)),
                    static_cast<std::uint32_t>(fnv1a64(participant_id) >> 32)};
  std::mt19937_64 gen(seq);
  return (gen() >> 63) != 0 ? Arm::Treatment : Arm::Control;
}

ArmAssigner::ArmAssigner(std::uint64_t seed, std::optional<std::filesystem::path> backing_file)
    : seed_(seed), backing_file_(std::move(backing_file)) {
  if (!backing_file_) return;
  std::ifstream in(*backing_file_);
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) continue;
    assigned_.emplace(line.substr(0, comma), parse_arm(line.substr(comma + 1)));
  }
}

Arm ArmAssigner::assign(const std::string& participant_id) {
  std::lock_guard lock(mu_);
  if (const auto it = assigned_.find(participant_id); it != assigned_.end()) return it->second;
  const Arm arm = draw_arm(seed_, participant_id);
  if (backing_file_) {
    std::filesystem::create_directories(backing_file_->parent_path().empty() ? "." : backing_file_->parent_path());
    std::ofstream out(*backing_file_, std::ios::app);
    out << participant_id << ',' << to_string(arm) << '\n';
  }
  assigned_.emplace(participant_id, arm);
  return arm;
}

std::optional<Arm> ArmAssigner::find(const std::string& participant_id) const {
  std::lock_guard lock(mu_);
  if (const auto it = assigned_.find(participant_id); it != assigned_.end()) return it->second;
  return std::nullopt;
}

std::map<Arm, std::size_t> ArmAssigner::counts() const {
  std::lock_guard lock(mu_);
  std::map<Arm, std::size_t> out{{Arm::Treatment, 0}, {Arm::Control, 0}};
  for (const auto& [id, arm] : assigned_) ++out[arm];
  return out;
}

std::vector<BalanceRow> balance_table(std::span<const Participant> participants) {
  std::size_t n_t = 0;
  for (const auto& p : participants) n_t += p.arm == Arm::Treatment ? 1 : 0;
  if (n_t == 0 || n_t == participants.size()) throw Error(ErrorCode::EmptyArm, "both arms need participants");

  std::vector<BalanceRow> rows;
  for (const auto& name : balance_covariates()) {
    std::vector<double> pooled;
    pooled.reserve(participants.size());
    for (const auto& p : participants) {
      const auto it = p.covariates.find(name);
      if (it == p.covariates.end()) {
        throw Error(ErrorCode::InvalidInput, "participant " + p.id + " lacks covariate " + name);
      }
      pooled.push_back(it->second);
    }
    if (name == "aot7_pre") pooled = standardize(pooled);

    std::vector<double> t, c;
    for (std::size_t i = 0; i < participants.size(); ++i) {
      (participants[i].arm == Arm::Treatment ? t : c).push_back(pooled[i]);
    }
    BalanceRow row;
    row.covariate = name;
    row.treatment_mean = mean(t);
    row.control_mean = mean(c);
    row.difference = row.treatment_mean - row.control_mean;
    row.std_error = std::sqrt(sample_variance(t) / static_cast<double>(t.size()) +
                              sample_variance(c) / static_cast<double>(c.size()));
    if (row.std_error > 0.0) {
      row.p_value = two_sided_normal_p(row.difference / row.std_error);
    } else {
      row.p_value = row.difference == 0.0 ? 1.0 : 0.0;
    }
    row.stars = stars(row.p_value, kBalanceStars);
    rows.push_back(std::move(row));
  }
  return rows;
}

ClickOutcome compute_o2(std::span<const ClickEvent> clicks) {
  ClickOutcome out;
  double sum = 0.0;
  for (const auto& c : clicks) {
    out.max_rank = std::max(out.max_rank, c.rank_clicked);
    ++out.n_clicked;
    sum += c.completeness_of_result;
  }
  if (out.n_clicked > 0) out.mean_click_completeness = sum / out.n_clicked;
  return out;
}

std::vector<OutcomeRecord> compute_outcomes(std::span<const Participant> participants,
                                            std::span<const ClickEvent> clicks,
                                            std::span<const SurveyResponse> post_surveys, const SurveyScale& scale,
                                            bool standardize_o1) {
  std::unordered_map<std::string, std::vector<ClickEvent>> by_participant;
  for (const auto& c : clicks) by_participant[c.participant_id].push_back(c);
  std::unordered_map<std::string, const SurveyResponse*> survey_of;
  for (const auto& s : post_surveys) {
    if (s.scale_name == scale.name) survey_of[s.participant_id] = &s;
  }

  std::vector<OutcomeRecord> out;
  for (const auto& p : participants) {
    const auto s = survey_of.find(p.id);
    if (s == survey_of.end()) continue;
    const auto score = score_survey(*s->second, scale);
    OutcomeRecord r;
    r.participant_id = p.id;
    r.arm = p.arm;
    r.o1_overall = score.overall;
    r.o1_dimensions = score.by_dimension;
    const auto& mine = by_participant[p.id];
    const auto o2 = compute_o2(mine);
    r.o2_max_rank = o2.max_rank;
    r.o2_n_clicked = o2.n_clicked;
    r.o2_mean_click_completeness = o2.mean_click_completeness;
    out.push_back(std::move(r));
  }

  if (standardize_o1 && out.size() >= 2) {
    std::vector<double> overall;
    for (const auto& r : out) overall.push_back(r.o1_overall);
    const auto z = standardize(overall);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].o1_overall = z[i];
    for (const auto& dim : scale.dimensions()) {
      std::vector<double> values;
      for (const auto& r : out) values.push_back(r.o1_dimensions.at(dim));
      const auto zd = standardize(values);
      for (std::size_t i = 0; i < out.size(); ++i) out[i].o1_dimensions[dim] = zd[i];
    }
  }
  return out;
}

EffectEstimate estimate_effect(std::string_view outcome_name, std::span<const std::optional<double>> outcomes,
                               std::span<const Arm> arms, std::span<const std::map<std::string, double>> controls,
                               bool robust_se) {
  if (arms.size() != outcomes.size() || (!controls.empty() && controls.size() != outcomes.size())) {
    throw Error(ErrorCode::DimensionMismatch, "outcomes, arms and controls differ in length");
  }
  std::vector<std::string> control_names;
  if (!controls.empty()) {
    for (const auto& name : balance_covariates()) {
      if (controls.front().count(name) != 0) control_names.push_back(name);
    }
    for (const auto& [name, value] : controls.front()) {
      if (std::find(control_names.begin(), control_names.end(), name) == control_names.end()) {
        control_names.push_back(name);
      }
    }
  }

  std::vector<std::size_t> keep;
  std::size_t per_arm[2] = {0, 0};
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i]) continue;
    keep.push_back(i);
    ++per_arm[arms[i] == Arm::Treatment ? 0 : 1];
  }
  if (per_arm[0] < 2 || per_arm[1] < 2) {
    throw Error(ErrorCode::EmptyArm, "effect estimation needs at least 2 participants per arm");
  }

  const auto n = static_cast<Eigen::Index>(keep.size());
  const auto k = static_cast<Eigen::Index>(1 + control_names.size());
  Eigen::MatrixXd x(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = keep[static_cast<std::size_t>(r)];
    y[r] = *outcomes[i];
    x(r, 0) = arms[i] == Arm::Treatment ? 1.0 : 0.0;
    for (std::size_t j = 0; j < control_names.size(); ++j) {
      const auto it = controls[i].find(control_names[j]);
      if (it == controls[i].end()) throw Error(ErrorCode::InvalidInput, "missing control " + control_names[j]);
      x(r, static_cast<Eigen::Index>(j + 1)) = it->second;
    }
  }
  std::vector<std::string> names{std::string(kTreatmentTerm)};
  names.insert(names.end(), control_names.begin(), control_names.end());

  OlsOptions options;
  options.robust_se = robust_se;
  options.outcome_name = std::string(outcome_name);
  EffectEstimate est;
  est.outcome = std::string(outcome_name);
  est.with_controls = !control_names.empty();
  est.fit = ols_fit(x, names, y, options);
  const auto& b = est.fit.at(kTreatmentTerm);
  est.beta = b.estimate;
  est.std_error = b.std_error;
  est.p_value = b.p_value;
  est.n_obs = est.fit.n_obs;
  return est;
}

std::vector<EffectEstimate> estimate_all_effects(std::span<const OutcomeRecord> outcomes,
                                                 std::span<const Participant> participants) {
  std::unordered_map<std::string, const Participant*> by_id;
  for (const auto& p : participants) by_id[p.id] = &p;

  std::vector<Arm> arms;
  std::vector<std::map<std::string, double>> controls;
  for (const auto& o : outcomes) {
    arms.push_back(o.arm);
    const auto it = by_id.find(o.participant_id);
    if (it == by_id.end()) throw Error(ErrorCode::InvalidInput, "outcome for unknown participant " + o.participant_id);
    controls.push_back(it->second->covariates);
  }

  std::vector<std::pair<std::string, std::vector<std::optional<double>>>> series;
  auto add = [&](std::string name, auto getter) {
    std::vector<std::optional<double>> values;
    for (const auto& o : outcomes) values.push_back(getter(o));
    series.emplace_back(std::move(name), std::move(values));
  };
  add("o1_overall", [](const OutcomeRecord& o) { return std::optional<double>(o.o1_overall); });
  if (!outcomes.empty()) {
    for (const auto& [dim, _] : outcomes.front().o1_dimensions) {
      add("o1_" + dim, [dim = dim](const OutcomeRecord& o) { return std::optional<double>(o.o1_dimensions.at(dim)); });
    }
  }
  add("o2_max_rank", [](const OutcomeRecord& o) { return std::optional<double>(o.o2_max_rank); });
  add("o2_n_clicked", [](const OutcomeRecord& o) { return std::optional<double>(o.o2_n_clicked); });
  add("o2_mean_click_completeness", [](const OutcomeRecord& o) { return o.o2_mean_click_completeness; });

  std::vector<EffectEstimate> out;
  for (const auto& [name, values] : series) {
    out.push_back(estimate_effect(name, values, arms));
    out.push_back(estimate_effect(name, values, arms, controls));
  }
  return out;
}

std::string participants_csv(std::span<const Participant> participants) {
  std::ostringstream out;
  out << "participant_id,arm";
  for (const auto& name : balance_covariates()) out << ',' << name;
  out << '\n';
  for (const auto& p : participants) {
    out << quoted(p.id) << ',' << to_string(p.arm);
    for (const auto& name : balance_covariates()) {
      const auto it = p.covariates.find(name);
      out << ',' << (it == p.covariates.end() ? std::string() : num(it->second));
    }
    out << '\n';
  }
  return out.str();
}

std::string clicks_csv(std::span<const ClickEvent> clicks) {
  std::ostringstream out;
  out << "participant_id,topic,query,rank_clicked,completeness_of_result,timestamp\n";
  for (const auto& c : clicks) {
    out << quoted(c.participant_id) << ',' << quoted(c.topic) << ',' << quoted(c.query) << ',' << c.rank_clicked
        << ',' << num(c.completeness_of_result) << ',' << c.timestamp << '\n';
  }
  return out.str();
}

std::string outcomes_csv(std::span<const OutcomeRecord> outcomes) {
  std::ostringstream out;
  out << "participant_id,arm,o1_overall";
  const auto dims = outcomes.empty() ? std::map<std::string, double>{} : outcomes.front().o1_dimensions;
  for (const auto& [dim, _] : dims) out << ",o1_" << dim;
  out << ",o2_max_rank,o2_n_clicked,o2_mean_click_completeness\n";
  for (const auto& o : outcomes) {
    out << quoted(o.participant_id) << ',' << to_string(o.arm) << ',' << num(o.o1_overall);
    for (const auto& [dim, _] : dims) out << ',' << num(o.o1_dimensions.at(dim));
    out << ',' << o.o2_max_rank << ',' << o.o2_n_clicked << ','
        << (o.o2_mean_click_completeness ? num(*o.o2_mean_click_completeness) : std::string()) << '\n';
  }
  return out.str();
}

std::string effects_csv(std::span<const EffectEstimate> effects) {
  std::ostringstream out;
  out << "outcome,controls,beta,std_error,p_value,stars,n_obs\n";
  for (const auto& e : effects) {
    out << e.outcome << ',' << (e.with_controls ? "yes" : "no") << ',' << num(e.beta) << ',' << num(e.std_error)
        << ',' << num(e.p_value) << ',' << stars(e.p_value, kRegressionStars) << ',' << e.n_obs << '\n';
  }
  return out.str();
}

std::string balance_csv(std::span<const BalanceRow> rows) {
  std::ostringstream out;
  out << "covariate,treatment_mean,control_mean,difference,std_error,p_value,stars\n";
  for (const auto& r : rows) {
    out << r.covariate << ',' << num(r.treatment_mean) << ',' << num(r.control_mean) << ',' << num(r.difference)
        << ',' << num(r.std_error) << ',' << num(r.p_value) << ',' << r.stars << '\n';
  }
  return out.str();
}

}  // namespace sonder
