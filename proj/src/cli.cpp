#include "fusion_probe/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "fusion_probe/corpusgen.hpp"
#include "fusion_probe/datamodel.hpp"
#include "fusion_probe/error.hpp"
#include "fusion_probe/fusion_add.hpp"
#include "fusion_probe/fusion_corr.hpp"
#include "fusion_probe/kgembed.hpp"
#include "fusion_probe/report.hpp"

#ifndef FUSION_PROBE_VERSION
#define FUSION_PROBE_VERSION "dev"
#endif

namespace fusion_probe::cli {
namespace {

namespace fs = std::filesystem;
using report::Json;

constexpr std::uint64_t kDefaultSeed = 20240521;

struct InputFile {
  std::string role;
  std::string path;
};

void write_manifest(const fs::path& dir, const std::string& command, Json config,
                    const std::vector<InputFile>& inputs, std::uint64_t seed) {
  Json m;
  m["command"] = command;
  m["version"] = FUSION_PROBE_VERSION;
  m["seed"] = seed;
  m["config"] = std::move(config);
  Json in = Json::object();
  for (const auto& f : inputs) {
    in[f.role] = {{"path", f.path}, {"fnv1a", fnv1a_hex(read_file(f.path))}};
  }
  m["inputs"] = std::move(in);
  write_file(dir / "manifest.json", m.dump(2) + "\n");
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

// Attribute input: binary CSV, or a categorical table when one-hot columns are given.
AttributeMatrix load_attribute_input(const std::string& path, const std::vector<std::string>& one_hot) {
  if (one_hot.empty()) return load_attributes(path);
  return corpus::one_hot_encode(corpus::load_categorical(path), one_hot);
}

std::optional<double> opt(double v, bool given) { return given ? std::optional<double>(v) : std::nullopt; }

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string triples, out, scoring = "mult", eval_mode = "auto";
  kg::KgConfig cfg;
  double test_fraction = 0.1;
  std::vector<int> ks{1, 3, 10};
  int threads = 0;
};

void cmd_train_kg(const TrainArgs& a, std::ostream& out) {
  kg::KgConfig cfg = a.cfg;
  cfg.scoring = kg::parse_scoring(a.scoring);
  cfg.validate();
  const TripleStore store = load_triples(a.triples);
  auto [train, test] = split_triples(store, a.test_fraction, cfg.seed);
  const auto result = kg::train(train, cfg);

  const auto ratings = numeric_relation_values(store.relations);
  kg::EvalMode mode;
  if (a.eval_mode == "relation") {
    mode = kg::EvalMode::relation;
  } else if (a.eval_mode == "tail") {
    mode = kg::EvalMode::tail;
  } else if (a.eval_mode == "auto") {
    mode = ratings ? kg::EvalMode::relation : kg::EvalMode::tail;
  } else {
    throw ArgumentError("--eval-mode must be auto, relation or tail");
  }
  const auto metrics = kg::evaluate(result.model, test, mode, a.ks, ratings, resolve_threads(a.threads));

  const fs::path dir = a.out;
  kg::save_checkpoint(result.model, store, cfg, dir);
  Json m;
  m["mode"] = mode == kg::EvalMode::relation ? "relation" : "tail";
  m["train_triples"] = train.size();
  m["test_triples"] = test.size();
  m["metrics"] = report::to_json(metrics);
  m["epoch_loss"] = result.epoch_loss;
  write_json(dir / "metrics.json", m);

  Json config = {{"dim", cfg.dim},
                 {"lr", cfg.lr},
                 {"epochs", cfg.epochs},
                 {"neg_entities", cfg.neg_entities},
                 {"neg_relations", cfg.neg_relations},
                 {"margin", cfg.margin},
                 {"scoring", kg::to_string(cfg.scoring)},
                 {"test_fraction", a.test_fraction},
                 {"eval_mode", a.eval_mode},
                 {"ks", a.ks}};
  write_manifest(dir, "train-kg", std::move(config), {{"triples", a.triples}}, cfg.seed);
  out << "train-kg: " << train.size() << " train / " << test.size() << " test triples, final loss "
      << result.epoch_loss.back() << ", MRR " << metrics.mrr << "\n";
}

// ---------------------------------------------------------------------------

struct CcaArgs {
  std::string attributes, embeddings, out;
  std::vector<std::string> one_hot;
  int n_perm = 100;
  std::uint64_t seed = kDefaultSeed;
  double ridge = 0.0;
  bool ridge_given = false;
  int distribution_components = 3;
  int threads = 0;
};

void cmd_cca(const CcaArgs& a, std::ostream& out, std::ostream& err) {
  const AttributeMatrix attrs = load_attribute_input(a.attributes, a.one_hot);
  const EmbeddingMatrix embs = load_embeddings(a.embeddings);
  const AlignedDataset ds = align(attrs, embs);
  const auto ridge = opt(a.ridge, a.ridge_given);
  const auto rep = corr::detect_correlation_fusion(ds, a.n_perm, ridge, a.seed, resolve_threads(a.threads));
  for (const auto& c : rep.dropped_columns) err << "warning: constant attribute column '" << c << "' dropped\n";

  const fs::path dir = a.out;
  write_json(dir / "report.json", report::to_json(rep));
  write_file(dir / "pcc_table.csv", report::pcc_table_csv(rep));

  const auto fit = numerics::cca_fit(ds.design(), ds.targets(), ridge);
  std::vector<std::vector<corr::AttributeScores>> dist;
  const Index shown = std::min<Index>(a.distribution_components, fit.components());
  for (Index c = 0; c < shown; ++c) dist.push_back(corr::component_attribute_distribution(ds, fit, c));
  write_file(dir / "attribute_scores.csv", report::attribute_scores_csv(dist));

  Json config = {{"n_perm", a.n_perm},
                 {"ridge", ridge ? Json(*ridge) : Json("default")},
                 {"one_hot", a.one_hot},
                 {"distribution_components", a.distribution_components},
                 {"rows", ds.rows()}};
  write_manifest(dir, "cca", std::move(config),
                 {{"attributes", a.attributes}, {"embeddings", a.embeddings}}, a.seed);
  out << "cca: n=" << ds.rows() << " k=" << rep.components() << " p=" << rep.p_value << "\n";
}

// ---------------------------------------------------------------------------

struct DecomposeArgs {
  std::string attributes, embeddings, out;
  std::vector<std::string> one_hot, group_by;
  int n_perm = 100;
  std::vector<int> ks{1, 10};
  std::uint64_t seed = kDefaultSeed;
  double rcond = 0.0;
  bool rcond_given = false;
  int threads = 0;
};

void cmd_decompose(const DecomposeArgs& a, std::ostream& out) {
  const AttributeMatrix attrs = load_attribute_input(a.attributes, a.one_hot);
  const EmbeddingMatrix embs = load_embeddings(a.embeddings);
  AlignedDataset ds = align(attrs, embs);
  if (!a.group_by.empty()) ds = additive::group_by_attributes(ds, a.group_by);
  const auto rcond = opt(a.rcond, a.rcond_given);
  const auto rep = additive::detect_additive_fusion(ds, a.n_perm, a.ks, a.seed, rcond,
                                                    resolve_threads(a.threads));
  const auto comp = additive::decompose(ds, rcond);

  const fs::path dir = a.out;
  write_json(dir / "report.json", report::to_json(rep));
  write_file(dir / "statistics.csv", report::statistics_csv(rep));
  write_file(dir / "permutations.csv", report::permutations_csv(rep));
  save_embeddings(EmbeddingMatrix{ds.attributes().column_names, comp.component_vecs},
                  dir / "components.vec");

  Json config = {{"n_perm", a.n_perm},
                 {"ks", a.ks},
                 {"rcond", rcond ? Json(*rcond) : Json("default")},
                 {"one_hot", a.one_hot},
                 {"group_by", a.group_by},
                 {"rows", ds.rows()},
                 {"residual_l2", comp.residual_l2}};
  write_manifest(dir, "decompose", std::move(config),
                 {{"attributes", a.attributes}, {"embeddings", a.embeddings}}, a.seed);
  out << "decompose: n=" << ds.rows() << " mean_cosine=" << rep.observed.mean_cosine
      << " p(l2)=" << rep.p_values.at("l2") << "\n";
}

// ---------------------------------------------------------------------------

struct CorpusArgs {
  std::string subjects, verbs, objects, out;
  std::string sentence_template = corpus::kDefaultTemplate;
};

void cmd_gen_corpus(const CorpusArgs& a, std::ostream& out, std::ostream& err) {
  const int given = !a.subjects.empty() + !a.verbs.empty() + !a.objects.empty();
  if (given != 0 && given != 3) throw ArgumentError("give all of --subjects, --verbs, --objects or none");
  corpus::SvoSpec spec = corpus::default_svo_spec();
  std::vector<InputFile> inputs;
  if (given == 3) {
    spec.subjects = corpus::load_word_list(a.subjects);
    spec.verbs = corpus::load_word_list(a.verbs);
    spec.objects = corpus::load_word_list(a.objects);
    inputs = {{"subjects", a.subjects}, {"verbs", a.verbs}, {"objects", a.objects}};
  }
  spec.sentence_template = a.sentence_template;
  const auto corpus = corpus::generate_svo(spec);
  for (const auto& w : corpus.warnings) err << "warning: " << w << "\n";

  const fs::path dir = a.out;
  write_file(dir / "sentences.tsv", corpus::format_sentences(corpus.sentences));
  save_attributes(corpus.design, dir / "design.csv");
  Json config = {{"template", spec.sentence_template},
                 {"default_word_lists", given == 0},
                 {"sentences", corpus.sentences.size()}};
  write_manifest(dir, "gen-corpus", std::move(config), inputs, 0);
  out << "gen-corpus: " << corpus.sentences.size() << " sentences, design " << corpus.design.rows() << "x"
      << corpus.design.cols() << "\n";
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string in, out, format = "svg";
};

void cmd_report(const ReportArgs& a, std::ostream& out) {
  const fs::path in = a.in;
  const fs::path dir = a.out.empty() ? in / "figures" : fs::path(a.out);
  Json j;
  try {
    j = Json::parse(read_file(in / "report.json"));
  } catch (const Json::exception& e) {
    throw DataError((in / "report.json").string() + ": " + e.what());
  }
  const std::string kind = j.value("kind", "");
  std::size_t written = 0;
  if (kind == "correlation") {
    const auto rep = report::corr_from_json(j);
    if (a.format == "csv") {
      write_file(dir / "pcc_table.csv", report::pcc_table_csv(rep));
      ++written;
    } else {
      for (Index c = 0; c < rep.components(); ++c) {
        const Eigen::VectorXd col = rep.permuted_pcc.col(c);
        const std::vector<double> values(col.data(), col.data() + col.size());
        write_file(dir / ("pcc_component_" + std::to_string(c + 1) + ".svg"),
                   report::histogram_svg("PCC, component " + std::to_string(c + 1) + " (" +
                                             std::to_string(rep.n_perm) + " permutations)",
                                         values, rep.observed_pcc(c)));
        ++written;
      }
    }
  } else if (kind == "additive") {
    const auto rep = report::additive_from_json(j);
    if (a.format == "csv") {
      write_file(dir / "statistics.csv", report::statistics_csv(rep));
      write_file(dir / "permutations.csv", report::permutations_csv(rep));
      written += 2;
    } else {
      std::vector<std::string> names{"l2", "cosine"};
      for (int k : rep.ks) names.push_back("retrieval@" + std::to_string(k));
      for (const auto& name : names) {
        std::vector<double> values;
        double observed = 0.0;
        if (name == "l2") {
          for (const auto& s : rep.permuted) values.push_back(s.mean_l2);
          observed = rep.observed.mean_l2;
        } else if (name == "cosine") {
          for (const auto& s : rep.permuted) values.push_back(s.mean_cosine);
          observed = rep.observed.mean_cosine;
        } else {
          const int k = std::stoi(name.substr(name.find('@') + 1));
          for (const auto& s : rep.permuted) values.push_back(s.retrieval_acc.at(k));
          observed = rep.observed.retrieval_acc.at(k);
        }
        std::string file = name;
        std::replace(file.begin(), file.end(), '@', '_');
        write_file(dir / ("hist_" + file + ".svg"),
                   report::histogram_svg(name + " (" + std::to_string(rep.n_perm) + " permutations, p = " +
                                             report::Json(rep.p_values.at(name)).dump() + ")",
                                         values, observed));
        ++written;
      }
    }
  } else {
    throw DataError((in / "report.json").string() + ": unknown report kind '" + kind + "'");
  }
  write_manifest(dir, "report", Json{{"format", a.format}}, {{"report", (in / "report.json").string()}},
                 j.value("seed", std::uint64_t{0}));
  out << "report: wrote " << written << " " << a.format << " file(s) to " << dir.string() << "\n";
}

}  // namespace

unsigned resolve_threads(int flag_value) {
  if (flag_value > 0) return static_cast<unsigned>(flag_value);
  if (const char* env = std::getenv("FUSION_PROBE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-graph embedding training and attribute fusion detection", "fusion-probe"};
  app.set_version_flag("--version", FUSION_PROBE_VERSION);
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train-kg", "Train a knowledge-graph embedding and evaluate it");
  t->add_option("--triples", train.triples, "Triples TSV (head, relation, tail)")->required()->check(CLI::ExistingFile);
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--dim", train.cfg.dim, "Embedding dimension")->capture_default_str();
  t->add_option("--lr", train.cfg.lr, "SGD learning rate")->capture_default_str();
  t->add_option("--epochs", train.cfg.epochs, "Training epochs")->capture_default_str();
  t->add_option("--neg-entities", train.cfg.neg_entities, "Entity corruptions per fact")->capture_default_str();
  t->add_option("--neg-relations", train.cfg.neg_relations, "Relation corruptions per fact")->capture_default_str();
  t->add_option("--margin", train.cfg.margin, "Margin for additive scoring")->capture_default_str();
  t->add_option("--scoring", train.scoring, "mult or add")->check(CLI::IsMember({"mult", "add"}))->capture_default_str();
  t->add_option("--seed", train.cfg.seed, "Master seed")->capture_default_str();
  t->add_option("--test-fraction", train.test_fraction, "Held-out fraction")->capture_default_str();
  t->add_option("--eval-mode", train.eval_mode, "auto, relation or tail")
      ->check(CLI::IsMember({"auto", "relation", "tail"}))->capture_default_str();
  t->add_option("--ks", train.ks, "Hits@K cutoffs")->delimiter(',')->capture_default_str();
  t->add_option("--threads", train.threads, "Worker threads");

  CcaArgs cca;
  auto* c = app.add_subcommand("cca", "Correlation-based fusion detection");
  c->add_option("--attributes", cca.attributes, "Attribute CSV")->required()->check(CLI::ExistingFile);
  c->add_option("--embeddings", cca.embeddings, "Embedding .vec file")->required()->check(CLI::ExistingFile);
  c->add_option("--out", cca.out, "Output directory")->required();
  c->add_option("--one-hot", cca.one_hot, "Treat attributes as categorical; encode these columns")->delimiter(',');
  c->add_option("--n-perm", cca.n_perm, "Permutations")->capture_default_str();
  c->add_option("--seed", cca.seed, "Master seed")->capture_default_str();
  auto* ridge = c->add_option("--ridge", cca.ridge, "Ridge added to covariance eigenvalues");
  c->add_option("--distribution-components", cca.distribution_components,
                "Components exported to attribute_scores.csv")->capture_default_str();
  c->add_option("--threads", cca.threads, "Worker threads");

  DecomposeArgs dec;
  auto* d = app.add_subcommand("decompose", "Additive fusion detection");
  d->add_option("--attributes", dec.attributes, "Attribute CSV")->required()->check(CLI::ExistingFile);
  d->add_option("--embeddings", dec.embeddings, "Embedding .vec file")->required()->check(CLI::ExistingFile);
  d->add_option("--out", dec.out, "Output directory")->required();
  d->add_option("--one-hot", dec.one_hot, "Treat attributes as categorical; encode these columns")->delimiter(',');
  d->add_option("--group-by", dec.group_by, "Average embeddings over these attribute groups")->delimiter(',');
  d->add_option("--n-perm", dec.n_perm, "Permutations")->capture_default_str();
  d->add_option("--ks", dec.ks, "Retrieval cutoffs")->delimiter(',')->capture_default_str();
  d->add_option("--seed", dec.seed, "Master seed")->capture_default_str();
  auto* rcond = d->add_option("--rcond", dec.rcond, "Relative singular value cutoff");
  d->add_option("--threads", dec.threads, "Worker threads");

  CorpusArgs gen;
  auto* g = app.add_subcommand("gen-corpus", "Generate the subject-verb-object corpus");
  g->add_option("--subjects", gen.subjects, "Subject word list")->check(CLI::ExistingFile);
  g->add_option("--verbs", gen.verbs, "Verb word list")->check(CLI::ExistingFile);
  g->add_option("--objects", gen.objects, "Object word list")->check(CLI::ExistingFile);
  g->add_option("--template", gen.sentence_template, "Sentence template")->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Figure data from a cca or decompose run");
  r->add_option("--in", rep.in, "Run directory containing report.json")->required()->check(CLI::ExistingDirectory);
  r->add_option("--format", rep.format, "csv or svg")->check(CLI::IsMember({"csv", "svg"}))->capture_default_str();
  r->add_option("--out", rep.out, "Output directory (default: <in>/figures)");

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << FUSION_PROBE_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "usage error: " << msg << "\n";
    return kExitUsage;
  }

  cca.ridge_given = ridge->count() > 0;
  dec.rcond_given = rcond->count() > 0;
  try {
    if (t->parsed()) cmd_train_kg(train, out);
    if (c->parsed()) cmd_cca(cca, out, err);
    if (d->parsed()) cmd_decompose(dec, out);
    if (g->parsed()) cmd_gen_corpus(gen, out, err);
    if (r->parsed()) cmd_report(rep, out);
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace fusion_probe::cli
