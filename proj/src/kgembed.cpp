#include "fusion_probe/kgembed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "fusion_probe/error.hpp"
#include "fusion_probe/parallel.hpp"
#include "fusion_probe/random.hpp"

namespace fusion_probe::kg {

std::string to_string(Scoring s) {
  return s == Scoring::multiplicative ? "multiplicative" : "additive";
}

Scoring parse_scoring(const std::string& s) {
  if (s == "mult" || s == "multiplicative" || s == "distmult") return Scoring::multiplicative;
  if (s == "add" || s == "additive" || s == "transe") return Scoring::additive;
  throw ArgumentError("unknown scoring '" + s + "' (expected mult or add)");
}

void KgConfig::validate() const {
  if (dim < 1) throw ArgumentError("dim must be >= 1");
  if (!(lr > 0.0)) throw ArgumentError("lr must be > 0");
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (neg_entities < 1) throw ArgumentError("neg_entities must be >= 1");
  if (neg_relations < 0) throw ArgumentError("neg_relations must be >= 0");
  if (scoring == Scoring::additive && !(margin > 0.0)) throw ArgumentError("margin must be > 0");
}

double score(const KgModel& model, Index head, Index relation, Index tail) {
  const auto h = model.entity_vecs.row(head);
  const auto r = model.relation_vecs.row(relation);
  const auto t = model.entity_vecs.row(tail);
  if (model.scoring == Scoring::multiplicative) return (h.array() * r.array() * t.array()).sum();
  return -(h + r - t).norm();
}

Eigen::VectorXd relation_scores(const KgModel& model, Index head, Index tail) {
  const auto h = model.entity_vecs.row(head);
  const auto t = model.entity_vecs.row(tail);
  if (model.scoring == Scoring::multiplicative) {
    return model.relation_vecs * h.cwiseProduct(t).transpose();
  }
  const Eigen::RowVectorXd diff = h - t;
  return -(model.relation_vecs.rowwise() + diff).rowwise().norm();
}

Eigen::VectorXd tail_scores(const KgModel& model, Index head, Index relation) {
  const auto h = model.entity_vecs.row(head);
  const auto r = model.relation_vecs.row(relation);
  if (model.scoring == Scoring::multiplicative) {
    return model.entity_vecs * h.cwiseProduct(r).transpose();
  }
  const Eigen::RowVectorXd shifted = h + r;
  return -((-model.entity_vecs).rowwise() + shifted).rowwise().norm();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const double top = scores.maxCoeff();
  Eigen::VectorXd e = (scores.array() - top).exp();
  return e / e.sum();
}

Eigen::VectorXd relation_softmax(const KgModel& model, Index head, Index tail) {
  return softmax(relation_scores(model, head, tail));
}

double expected_rating(const KgModel& model, Index head, Index tail,
                       const std::vector<double>& rating_values) {
  if (static_cast<Index>(rating_values.size()) != model.relation_vecs.rows()) {
    throw ArgumentError("expected_rating: need one value per relation");
  }
  const Eigen::VectorXd p = relation_softmax(model, head, tail);
  const Eigen::Map<const Eigen::VectorXd> values(rating_values.data(), p.size());
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  return std::clamp(p.dot(values), lo, hi);
}

namespace {

struct Candidate {
  Index head;
  Index relation;
  Index tail;
};

Index other_than(Rng& rng, Index count, Index excluded) {
  if (count <= 1) return excluded;
  auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(count - 1)));
  return j >= excluded ? j + 1 : j;
}

void corrupt(Rng& rng, const Triple& f, const KgConfig& cfg, Index n_entities, Index n_relations,
             std::vector<Candidate>& out) {
  out.clear();
  out.push_back({f.head, f.relation, f.tail});
  for (int j = 0; j < cfg.neg_entities; ++j) {
    if (rng.coin()) {
      out.push_back({other_than(rng, n_entities, f.head), f.relation, f.tail});
    } else {
      out.push_back({f.head, f.relation, other_than(rng, n_entities, f.tail)});
    }
  }
  if (n_relations > 1) {
    for (int j = 0; j < cfg.neg_relations; ++j) {
      out.push_back({f.head, other_than(rng, n_relations, f.relation), f.tail});
    }
  }
}

struct Gradient {
  bool entity;
  Index row;
  Eigen::RowVectorXd value;
};

// Softmax cross-entropy of the true fact (candidate 0) against its corruptions.
double multiplicative_step(KgModel& m, const std::vector<Candidate>& cands, double lr,
                           std::vector<Gradient>& grads) {
  Eigen::VectorXd s(static_cast<Index>(cands.size()));
  for (std::size_t j = 0; j < cands.size(); ++j) {
    s(static_cast<Index>(j)) = score(m, cands[j].head, cands[j].relation, cands[j].tail);
  }
  const double top = s.maxCoeff();
  const double lse = top + std::log((s.array() - top).exp().sum());
  const double loss = lse - s(0);
  const Eigen::VectorXd p = (s.array() - lse).exp();

  grads.clear();
  for (std::size_t j = 0; j < cands.size(); ++j) {
    const double g = p(static_cast<Index>(j)) - (j == 0 ? 1.0 : 0.0);
    const auto& c = cands[j];
    const auto h = m.entity_vecs.row(c.head);
    const auto r = m.relation_vecs.row(c.relation);
    const auto t = m.entity_vecs.row(c.tail);
    grads.push_back({true, c.head, g * r.cwiseProduct(t)});
    grads.push_back({false, c.relation, g * h.cwiseProduct(t)});
    grads.push_back({true, c.tail, g * h.cwiseProduct(r)});
  }
  for (const auto& gr : grads) {
    (gr.entity ? m.entity_vecs : m.relation_vecs).row(gr.row) -= lr * gr.value;
  }
  return loss;
}

// Margin ranking loss on translation distances.
double additive_step(KgModel& m, const std::vector<Candidate>& cands, double margin, double lr,
                     std::vector<Gradient>& grads) {
  auto residual = [&](const Candidate& c) -> Eigen::RowVectorXd {
    return m.entity_vecs.row(c.head) + m.relation_vecs.row(c.relation) - m.entity_vecs.row(c.tail);
  };
  auto push = [&](const Candidate& c, const Eigen::RowVectorXd& e, double sign) {
    const double norm = e.norm();
    if (norm == 0.0) return;
    const Eigen::RowVectorXd unit = (sign / norm) * e;
    grads.push_back({true, c.head, unit});
    grads.push_back({false, c.relation, unit});
    grads.push_back({true, c.tail, -unit});
  };

  grads.clear();
  const Eigen::RowVectorXd pos = residual(cands[0]);
  const double pos_dist = pos.norm();
  double loss = 0.0;
  for (std::size_t j = 1; j < cands.size(); ++j) {
    const Eigen::RowVectorXd neg = residual(cands[j]);
    const double violation = margin + pos_dist - neg.norm();
    if (violation <= 0.0) continue;
    loss += violation;
    push(cands[0], pos, 1.0);
    push(cands[j], neg, -1.0);
  }
  for (const auto& gr : grads) {
    (gr.entity ? m.entity_vecs : m.relation_vecs).row(gr.row) -= lr * gr.value;
  }
  return loss;
}

}  // namespace

TrainResult train(const TripleStore& triples, const KgConfig& cfg) {
  cfg.validate();
  if (triples.triples.empty()) throw ArgumentError("train: no training triples");
  triples.validate();

  Rng rng(cfg.seed);
  const Index n_entities = triples.entities.size();
  const Index n_relations = triples.relations.size();
  const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));

  TrainResult result;
  KgModel& model = result.model;
  model.scoring = cfg.scoring;
  model.entity_vecs.resize(n_entities, cfg.dim);
  model.relation_vecs.resize(n_relations, cfg.dim);
  for (Index i = 0; i < n_entities; ++i)
    for (Index k = 0; k < cfg.dim; ++k) model.entity_vecs(i, k) = rng.uniform(-bound, bound);
  for (Index i = 0; i < n_relations; ++i)
    for (Index k = 0; k < cfg.dim; ++k) model.relation_vecs(i, k) = rng.uniform(-bound, bound);

  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Candidate> cands;
  std::vector<Gradient> grads;
  std::vector<double> fact_loss(triples.size());
  result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i = 0; i < order.size(); ++i) {
      corrupt(rng, triples.triples[order[i]], cfg, n_entities, n_relations, cands);
      fact_loss[i] = cfg.scoring == Scoring::multiplicative
                         ? multiplicative_step(model, cands, cfg.lr, grads)
                         : additive_step(model, cands, cfg.margin, cfg.lr, grads);
    }
    const double mean = pairwise_mean(fact_loss);
    if (!std::isfinite(mean) || !model.entity_vecs.allFinite() || !model.relation_vecs.allFinite()) {
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean);
  }
  return result;
}

double average_rank(const Eigen::VectorXd& scores, Index target) {
  const double s = scores(target);
  Index above = 0, ties = 0;
  for (Index i = 0; i < scores.size(); ++i) {
    if (i == target) continue;
    if (scores(i) > s) {
      ++above;
    } else if (scores(i) == s) {
      ++ties;
    }
  }
  return 1.0 + static_cast<double>(above) + 0.5 * static_cast<double>(ties);
}

EvalMetrics evaluate(const KgModel& model, const TripleStore& test, EvalMode mode,
                     const std::vector<int>& ks,
                     const std::optional<std::vector<double>>& rating_values, unsigned threads) {
  if (test.triples.empty()) throw ArgumentError("evaluate: empty test set");
  if (mode == EvalMode::relation) {
    if (!rating_values) throw ArgumentError("evaluate: relation mode needs numeric rating values");
    if (static_cast<Index>(rating_values->size()) != model.relation_vecs.rows()) {
      throw ArgumentError("evaluate: need one rating value per relation");
    }
  }
  const std::size_t n = test.size();
  std::vector<double> rank(n), sq_err(n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    const Triple& f = test.triples[i];
    if (mode == EvalMode::relation) {
      rank[i] = average_rank(relation_scores(model, f.head, f.tail), f.relation);
      const double err = expected_rating(model, f.head, f.tail, *rating_values) -
                         (*rating_values)[static_cast<std::size_t>(f.relation)];
      sq_err[i] = err * err;
    } else {
      rank[i] = average_rank(tail_scores(model, f.head, f.relation), f.tail);
    }
  });

  EvalMetrics out;
  out.count = n;
  std::vector<double> recip(n);
  std::transform(rank.begin(), rank.end(), recip.begin(), [](double r) { return 1.0 / r; });
  out.mr = pairwise_mean(rank);
  out.mrr = pairwise_mean(recip);
  if (mode == EvalMode::relation) out.rmse = std::sqrt(pairwise_mean(sq_err));
  for (int k : ks) {
    const auto hits = std::count_if(rank.begin(), rank.end(),
                                    [k](double r) { return r <= static_cast<double>(k); });
    out.hits_at[k] = static_cast<double>(hits) / static_cast<double>(n);
  }
  return out;
}

void save_checkpoint(const KgModel& model, const TripleStore& store, const KgConfig& cfg,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  EmbeddingMatrix entities{store.entities.names(), model.entity_vecs};
  EmbeddingMatrix relations{store.relations.names(), model.relation_vecs};
  save_embeddings(entities, dir / "entities.vec");
  save_embeddings(relations, dir / "relations.vec");

  char hex[2][17];
  std::snprintf(hex[0], sizeof hex[0], "%016llx",
                static_cast<unsigned long long>(store.entities.digest()));
  std::snprintf(hex[1], sizeof hex[1], "%016llx",
                static_cast<unsigned long long>(store.relations.digest()));
  nlohmann::ordered_json j;
  j["config"] = {{"dim", cfg.dim},
                 {"lr", cfg.lr},
                 {"epochs", cfg.epochs},
                 {"neg_entities", cfg.neg_entities},
                 {"neg_relations", cfg.neg_relations},
                 {"margin", cfg.margin},
                 {"scoring", to_string(cfg.scoring)},
                 {"seed", cfg.seed}};
  j["entity_count"] = store.entities.size();
  j["relation_count"] = store.relations.size();
  j["entity_vocab_fnv1a"] = hex[0];
  j["relation_vocab_fnv1a"] = hex[1];
  write_file(dir / "checkpoint.json", j.dump(2) + "\n");
}

}  // namespace fusion_probe::kg
