// Command-line front end: ingest, score, analyze, simulate and serve.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "sonder/analytics.hpp"
#include "sonder/completeness.hpp"
#include "sonder/embedding.hpp"
#include "sonder/error.hpp"
#include "sonder/experiment.hpp"
#include "sonder/ingestion/pagerank.hpp"
#include "sonder/ingestion/store.hpp"
#include "sonder/ingestion/trending.hpp"
#include "sonder/service.hpp"

namespace fs = std::filesystem;
using namespace sonder;

namespace {

constexpr int kUsageExit = 2;

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

// domain,weight lines; a leading header row is skipped.
DomainWeights load_weights(const fs::path& path) {
  DomainWeights weights;
  for (const auto& row : read_csv(path)) {
    if (row.size() != 2) throw Error(ErrorCode::ParseError, "weights rows must be domain,weight");
    if (row[0] == "domain") continue;
    weights[row[0]] = std::stod(row[1]);
  }
  return weights;
}

// Full key "CC:YYYY-MM-DD:kind:query", or a bare query stored under one key.
QueryKey resolve_key(const CorpusStore& store, const std::string& text) {
  try {
    return QueryKey::parse(text);
  } catch (const Error&) {
  }
  const auto keys = store.keys_for_query(text);
  if (keys.empty()) throw Error(ErrorCode::NotFound, "no stored corpus for query '" + text + "'");
  if (keys.size() > 1) {
    std::string msg = "query '" + text + "' is ambiguous; use one of:";
    for (const auto& k : keys) msg += "\n  " + k.to_string();
    throw Error(ErrorCode::InvalidInput, msg);
  }
  return keys.front();
}

struct ScoredCorpus {
  QueryCorpus corpus;
  std::vector<EmbeddingVector> vectors;
  CorpusVector corpus_vector;
};

ScoredCorpus score_corpus(QueryCorpus corpus, const Embedder& embedder, const std::optional<DomainWeights>& weights) {
  ScoredCorpus out{std::move(corpus), {}, {}};
  out.vectors = embedder.embed(out.corpus.texts());
  if (weights) {
    const auto w = weights_for_corpus(out.corpus, *weights);
    out.corpus_vector = build_corpus_vector(out.vectors, std::span<const double>(w));
  } else {
    out.corpus_vector = build_corpus_vector(out.vectors);
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  std::cout << "wrote " << path.string() << '\n';
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// country,date,query,volume
std::map<QueryKey, std::uint64_t> load_volumes(const fs::path& path) {
  std::map<QueryKey, std::uint64_t> out;
  for (const auto& row : read_csv(path)) {
    if (row.size() < 4) throw Error(ErrorCode::ParseError, "volume rows must be country,date,query,volume");
    if (row[0] == "country") continue;
    for (const SearchKind kind : {SearchKind::Web, SearchKind::News}) {
      out[QueryKey{row[2], row[0], Date::parse(row[1]), kind}] = std::stoull(row[3]);
    }
  }
  return out;
}

struct AnalyzeInputs {
  std::vector<QueryObservation> observations;
  std::vector<RegionCurveInput> curves;
};

AnalyzeInputs collect(const CorpusStore& store, const Embedder& embedder, const CovariateTable* covariates,
                      const std::map<QueryKey, std::uint64_t>& volumes, int page_size) {
  AnalyzeInputs in;
  std::size_t unmapped = 0;
  for (const auto& key : store.keys()) {
    const auto region = covariates ? covariates->region(key.country) : region_of_country(key.country);
    if (!region) {
      ++unmapped;
      continue;
    }
    const auto scored = score_corpus(store.load(key), embedder, std::nullopt);
    auto curve = completeness_curve(scored.vectors, scored.corpus_vector);
    const auto vol = volumes.find(key);
    in.observations.push_back({key.country, *region, key.date, first_page_completeness(curve, page_size),
                               vol == volumes.end() ? 1 : vol->second});
    in.curves.push_back({*region, std::move(curve)});
  }
  if (unmapped > 0) std::cerr << "skipped " << unmapped << " corpora from countries without a region\n";
  return in;
}

std::string aggregates_csv(std::span<const CountryDayAggregate> rows) {
  std::ostringstream out;
  out << "country,region,date,mean_completeness,search_volume,queries\n";
  for (const auto& r : rows) {
    out << r.country.value_or("") << ',' << (r.region ? std::string(to_string(*r.region)) : "") << ','
        << (r.date ? r.date->to_string() : "") << ',' << fmt("%.6f", r.mean_completeness) << ',' << r.search_volume
        << ',' << r.queries << '\n';
  }
  return out.str();
}

std::string region_curves_csv(std::span<const RegionCurve> curves) {
  std::ostringstream out;
  out << "region,fraction_viewed,value,auc,n_curves\n";
  for (const auto& c : curves) {
    for (const auto& p : c.curve.points) {
      out << '"' << to_string(c.region) << "\"," << fmt("%.2f", p.fraction_viewed) << ',' << fmt("%.9f", p.value)
          << ',' << fmt("%.9f", c.curve.auc) << ',' << c.n_curves << '\n';
    }
  }
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Completeness-aware search: ingestion, scoring, analysis and the experiment service", "sonder"};
  app.require_subcommand(1);
  std::string data_dir = CorpusStore::default_root().string();
  app.add_option("--data-dir", data_dir, "Corpus store root (SONDER_DATA_DIR)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load JSONL search records into the store");
  std::string ingest_input;
  bool strict = false;
  ingest->add_option("--input", ingest_input, "JSONL file, one record per line")->required()->check(CLI::ExistingFile);
  ingest->add_flag("--strict", strict, "Fail on the first bad line without writing anything");

  // curve / rank
  std::string key_text, weights_path;
  auto* curve = app.add_subcommand("curve", "Print the cumulative completeness curve of a stored query");
  curve->add_option("query-key", key_text, "CC:YYYY-MM-DD:kind:query, or a bare query")->required();
  curve->add_option("--weights", weights_path, "CSV of domain,weight for the corpus vector");

  auto* rank = app.add_subcommand("rank", "Rerank a stored query by blended relevance and completeness");
  double lambda = 0.0;
  rank->add_option("query-key", key_text, "CC:YYYY-MM-DD:kind:query, or a bare query")->required();
  rank->add_option("--lambda", lambda, "Completeness weight in [0, 1]")->required()->check(CLI::Range(0.0, 1.0));
  rank->add_option("--weights", weights_path, "CSV of domain,weight for the corpus vector");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Cross-country aggregates, regressions and region curves");
  analyze->require_subcommand(1);
  std::string analyze_input, covariates_path, out_dir = "out", volumes_path, group_by = "country,region,date";
  int page_size = 10;
  std::vector<CLI::App*> analyze_cmds;
  for (const char* name : {"aggregate", "regress", "curves"}) {
    auto* sub = analyze->add_subcommand(name);
    sub->add_option("--input", analyze_input, "Corpus store root")->required();
    sub->add_option("--covariates", covariates_path, "CSV country,year,<covariates...>[,region]");
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--volumes", volumes_path, "CSV country,date,query,volume (default volume 1)");
    sub->add_option("--page-size", page_size, "First-page size")->check(CLI::PositiveNumber);
    analyze_cmds.push_back(sub);
  }
  analyze_cmds[0]->add_option("--group-by", group_by, "Comma list from country,region,date");
  analyze_cmds[1]->get_option("--covariates")->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run simulated participants through the experiment analysis");
  std::size_t agents = 876;
  std::optional<std::size_t> treated;
  std::uint64_t sim_seed = 1;
  AgentBehavior behavior;
  double fact_shift = 0.0;
  std::string sim_out = "simulation";
  simulate->add_option("--agents", agents, "Number of participants")->check(CLI::Range(2, 10000000));
  simulate->add_option("--treated", treated, "Exact treatment-arm size");
  simulate->add_option("--seed", sim_seed, "Random seed");
  simulate->add_option("--rank-shift", behavior.treatment_rank_shift, "Treatment shift of clicked ranks");
  simulate->add_option("--completeness-shift", behavior.completeness_preference,
                       "Treatment shift of clicked completeness (points)");
  simulate->add_option("--click-shift", behavior.treatment_click_shift, "Extra clicks per treated participant");
  simulate->add_option("--fact-resistance-shift", fact_shift, "Treatment shift of fact resistance (SD units)");
  simulate->add_option("--out", sim_out, "Output directory");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP experiment service");
  int port = 8080;
  std::string host = "0.0.0.0", roster_path, static_dir, scales_dir, telemetry_dir;
  int ttl = 3600;
  bool debug_raw = false;
  if (const char* p = std::getenv("SONDER_PORT"); p && *p) port = std::atoi(p);
  serve->add_option("--port", port, "Listen port (SONDER_PORT)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--roster", roster_path, "CSV id,password_hash")->required();
  serve->add_option("--static", static_dir, "Web assets mounted at /app");
  serve->add_option("--scales", scales_dir, "Directory of survey scale JSON files");
  serve->add_option("--telemetry", telemetry_dir, "Telemetry directory (default <data-dir>/telemetry)");
  serve->add_option("--ttl", ttl, "Session lifetime in seconds")->check(CLI::PositiveNumber);
  serve->add_option("--weights", weights_path, "CSV of domain,weight for corpus vectors");
  serve->add_flag("--debug-raw", debug_raw, "Include raw cosines in treatment responses");

  // pagerank
  auto* pr = app.add_subcommand("pagerank", "Domain trust weights from a link graph");
  std::string edges_path, pr_out;
  pr->add_option("--edges", edges_path, "CSV from_domain,to_domain")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "Write domain,weight CSV here instead of stdout");

  // trending
  auto* trending = app.add_subcommand("trending", "List a day's trending queries from fixtures");
  std::string fixtures, country, date;
  trending->add_option("--fixtures", fixtures, "Fixture root <root>/<CC>/<date>.txt")->required();
  trending->add_option("--country", country, "Two-letter country code")->required();
  trending->add_option("--date", date, "YYYY-MM-DD")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsageExit;
  }

  try {
    if (*ingest) {
      CorpusStore store(data_dir);
      const auto report = ingest_jsonl(ingest_input, store, strict);
      for (const auto& issue : report.issues) std::cerr << "line " << issue.line << ": " << issue.message << '\n';
      std::cout << "accepted " << report.accepted << ", skipped " << report.skipped << '\n';
      return 0;
    }

    if (*curve || *rank) {
      CorpusStore store(data_dir);
      const auto key = resolve_key(store, key_text);
      std::optional<DomainWeights> weights;
      if (!weights_path.empty()) weights = load_weights(weights_path);
      const auto embedder = make_embedder(EmbedderConfig::from_env());
      const auto scored = score_corpus(store.load(key), *embedder, weights);
      std::cout << "# " << key.to_string() << '\n';

      if (*curve) {
        const auto c = completeness_curve(scored.vectors, scored.corpus_vector);
        std::cout << "fraction_viewed\tcompleteness\n";
        for (const auto& p : c.points) std::cout << fmt("%.6f", p.fraction_viewed) << '\t' << fmt("%.6f", p.value) << '\n';
        std::cout << "AUC\t" << fmt("%.6f", c.auc) << '\n';
        return 0;
      }

      const auto query_vec = embedder->embed(std::span<const std::string>(&key.query, 1)).front();
      const auto ids = scored.corpus.record_ids();
      const auto results =
          rerank(score_results(query_vec, scored.vectors, scored.corpus_vector, ids, Lambda(lambda)), Lambda(lambda));
      std::cout << "position\trank\tblended\trelevance\tcompleteness\ttitle\n";
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        std::cout << i + 1 << '\t' << r.rank << '\t' << fmt("%.6f", r.blended) << '\t' << fmt("%.6f", r.relevance)
                  << '\t' << fmt("%.6f", r.completeness) << '\t'
                  << scored.corpus.records[static_cast<std::size_t>(r.rank - 1)].title << '\n';
      }
      return 0;
    }

    if (*analyze) {
      CorpusStore store(analyze_input);
      std::optional<CovariateTable> covariates;
      if (!covariates_path.empty()) covariates = CovariateTable::load_csv(covariates_path);
      std::map<QueryKey, std::uint64_t> volumes;
      if (!volumes_path.empty()) volumes = load_volumes(volumes_path);
      const auto embedder = make_embedder(EmbedderConfig::from_env());
      const auto inputs = collect(store, *embedder, covariates ? &*covariates : nullptr, volumes, page_size);
      const fs::path out(out_dir);

      if (analyze->got_subcommand("aggregate")) {
        GroupBy by;
        std::stringstream ss(group_by);
        std::string part;
        while (std::getline(ss, part, ',')) {
          if (part == "country") by.country = true;
          else if (part == "region") by.region = true;
          else if (part == "date") by.date = true;
          else throw Error(ErrorCode::InvalidInput, "unknown group-by field '" + part + "'");
        }
        write_file(out / "aggregates.csv", aggregates_csv(aggregate(inputs.observations, by)));
      } else if (analyze->got_subcommand("regress")) {
        const auto fits = fit_press_models(inputs.observations, *covariates);
        const auto table = export_table(fits);
        write_file(out / "regression.csv", table.csv);
        write_file(out / "regression.txt", table.text);
        std::cout << table.text;
      } else {
        write_file(out / "region_curves.csv", region_curves_csv(region_curves(inputs.curves)));
      }
      return 0;
    }

    if (*simulate) {
      behavior.treatment_count = treated;
      if (fact_shift != 0.0) behavior.dimension_shift_sd[std::string(kFactResistance)] = fact_shift;
      const auto data = simulate_agents(agents, behavior, sim_seed);
      const auto outcomes = compute_outcomes(data.participants, data.clicks, data.surveys, aot17_scale());
      const auto effects = estimate_all_effects(outcomes, data.participants);
      const fs::path out(sim_out);
      write_file(out / "participants.csv", participants_csv(data.participants));
      write_file(out / "clicks.csv", clicks_csv(data.clicks));
      write_file(out / "outcomes.csv", outcomes_csv(outcomes));
      write_file(out / "effects.csv", effects_csv(effects));
      write_file(out / "balance.csv", balance_csv(balance_table(data.participants)));
      for (const auto& e : effects) {
        std::cout << e.outcome << (e.with_controls ? " (controls)" : "") << ": beta " << fmt("%.4f", e.beta)
                  << " se " << fmt("%.4f", e.std_error) << " p " << fmt("%.4g", e.p_value) << " n " << e.n_obs
                  << '\n';
      }
      return 0;
    }

    if (*serve) {
      ServiceConfig config = ServiceConfig::from_env();
      config.data_dir = data_dir;
      if (!telemetry_dir.empty()) config.telemetry_dir = telemetry_dir;
      if (!static_dir.empty()) config.static_dir = static_dir;
      if (!scales_dir.empty()) config.scales_dir = scales_dir;
      if (!weights_path.empty()) config.domain_weights = load_weights(weights_path);
      config.session_ttl = std::chrono::seconds(ttl);
      config.debug_raw = debug_raw;
      SearchService service(config, Roster::load_csv(roster_path));
      std::cout << "listening on " << host << ':' << port << std::endl;
      run_server(service, host, port);
      return 0;
    }

    if (*pr) {
      std::vector<std::pair<std::string, std::string>> edges;
      for (const auto& row : read_csv(edges_path)) {
        if (row.size() != 2) throw Error(ErrorCode::ParseError, "edge rows must be from,to");
        if (row[0] == "from") continue;
        edges.emplace_back(row[0], row[1]);
      }
      std::ostringstream csv;
      csv << "domain,weight\n";
      for (const auto& [domain, w] : pagerank(DomainGraph::from_named_edges(edges))) {
        csv << domain << ',' << fmt("%.12g", w) << '\n';
      }
      if (pr_out.empty()) std::cout << csv.str();
      else write_file(pr_out, csv.str());
      return 0;
    }

    if (*trending) {
      for (const auto& q : fetch_trending(FixtureTrendingSource(fixtures), country, Date::parse(date))) {
        std::cout << q << '\n';
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
