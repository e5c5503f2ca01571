#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sonder/error.hpp"
#include "sonder/experiment.hpp"

namespace sonder {

std::vector<std::string> SurveyScale::dimensions() const {
  std::vector<std::string> out;
  for (const auto& item : items) {
    if (std::find(out.begin(), out.end(), item.dimension) == out.end()) out.push_back(item.dimension);
  }
  return out;
}

SurveyScale SurveyScale::from_json(std::string_view json_text) {
  SurveyScale scale;
  try {
    const auto j = nlohmann::json::parse(json_text);
    scale.name = j.at("name").get<std::string>();
    scale.version = j.value("version", "1");
    scale.min_answer = j.value("min_answer", -3);
    scale.max_answer = j.value("max_answer", 3);
    scale.placeholder = j.value("placeholder", false);
    for (const auto& item : j.at("items")) {
      scale.items.push_back({item.value("text", ""), item.at("dimension").get<std::string>(),
                             item.value("reverse_coded", false)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("bad scale definition: ") + e.what());
  }
  if (scale.name.empty() || scale.items.empty()) {
    throw Error(ErrorCode::InvalidConfig, "scale definition needs a name and at least one item");
  }
  if (scale.min_answer >= scale.max_answer) throw Error(ErrorCode::InvalidConfig, "empty answer range");
  return scale;
}

SurveyScale SurveyScale::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open scale definition " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string SurveyScale::to_json() const {
  nlohmann::json j{{"name", name},
                   {"version", version},
                   {"min_answer", min_answer},
                   {"max_answer", max_answer},
                   {"placeholder", placeholder},
                   {"items", nlohmann::json::array()}};
  for (const auto& item : items) {
    j["items"].push_back({{"text", item.text}, {"dimension", item.dimension}, {"reverse_coded", item.reverse_coded}});
  }
  return j.dump(2);
}

const SurveyScale& aot17_scale() {
  static const SurveyScale kScale = [] {
    SurveyScale s;
    s.name = "AOT17";
    s.version = "1";
    const std::string fact(kFactResistance), dog(kDogmatism), lib(kLiberalism), bel(kBeliefPersonification);
    s.items = {
        {"One should disregard evidence that conflicts with your established beliefs.", fact, true},
        {"It is important to persevere in your beliefs even when evidence is brought to bear against them.", fact,
         true},
        {"Certain beliefs are just too important to abandon no matter how good a case can be made against them.",
         fact, true},
        {"Beliefs should always be revised in response to new information or evidence.", fact, false},
        {"People should always take into consideration evidence that goes against their beliefs.", fact, false},
        {"I believe that loyalty to one's ideals and principles is more important than \"open-mindedness\".", dog,
         true},
        {"I believe that the 'new morality' of permissiveness is no morality at all.", dog, true},
        {"Of all the different philosophies which exist in the world there is probably only one which is correct.",
         dog, true},
        {"I think there are many wrong ways, but only one right way, to almost anything.", dog, true},
        {"I believe letting youth hear controversial speakers can only confuse and mislead them.", dog, true},
        {"I believe we should look to our religious authorities for decisions on all moral issues.", dog, true},
        {"I consider myself broad-minded and tolerant of other people's lifestyles.", lib, false},
        {"A person should always consider new possibilities.", lib, false},
        {"I believe that the different ideas of right and wrong that people in other societies have may be valid "
         "for them.",
         lib, false},
        {"There are a number of people I have come to dislike because of the things they stand for.", bel, true},
        {"I tend to classify people as either for me or against me.", bel, true},
        {"I feel anger whenever a person stubbornly refuses to admit they are wrong.", bel, true},
    };
    return s;
  }();
  return kScale;
}

SurveyScore score_survey(const SurveyResponse& response, const SurveyScale& scale) {
  if (scale.placeholder) {
    throw Error(ErrorCode::InvalidConfig, "scale " + scale.name + " is a placeholder without item text");
  }
  if (response.answers.size() != scale.items.size()) {
    throw Error(ErrorCode::InvalidResponse, "expected " + std::to_string(scale.items.size()) + " answers, got " +
                                                std::to_string(response.answers.size()) + " (item index " +
                                                std::to_string(std::min(response.answers.size(), scale.items.size())) +
                                                ")");
  }
  std::map<std::string, std::pair<double, int>> sums;
  double total = 0.0;
  for (std::size_t i = 0; i < scale.items.size(); ++i) {
    const int a = response.answers[i];
    if (a < scale.min_answer || a > scale.max_answer) {
      throw Error(ErrorCode::InvalidResponse, "answer " + std::to_string(a) + " at item index " +
                                                  std::to_string(i) + " is outside [" +
                                                  std::to_string(scale.min_answer) + ", " +
                                                  std::to_string(scale.max_answer) + "]");
    }
    const double effective = scale.items[i].reverse_coded ? -static_cast<double>(a) : static_cast<double>(a);
    auto& [sum, count] = sums[scale.items[i].dimension];
    sum += effective;
    ++count;
    total += effective;
  }
  SurveyScore score;
  score.overall = total / static_cast<double>(scale.items.size());
  for (const auto& [dim, entry] : sums) score.by_dimension[dim] = entry.first / entry.second;
  return score;
}

}  // namespace sonder
