#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fusion_probe/datamodel.hpp"

namespace fusion_probe::kg {

enum class Scoring {
  multiplicative,  // DistMult: sum_k h_k r_k t_k
  additive,        // TransE: -||h + r - t||_2
};

std::string to_string(Scoring s);
Scoring parse_scoring(const std::string& s);  // "mult" / "multiplicative" / "add" / "additive"

struct KgConfig {
  Index dim = 64;
  double lr = 0.01;
  int epochs = 300;
  int neg_entities = 10;
  int neg_relations = 4;
  double margin = 1.0;
  Scoring scoring = Scoring::multiplicative;
  std::uint64_t seed = 42;

  void validate() const;
};

struct KgModel {
  Scoring scoring = Scoring::multiplicative;
  Eigen::MatrixXd entity_vecs;    // |V| x d
  Eigen::MatrixXd relation_vecs;  // |R| x d; DistMult diagonal or TransE translation

  Index dim() const { return entity_vecs.cols(); }
};

/// Plausibility of (h, r, t); higher is more plausible for both scorings.
double score(const KgModel& model, Index head, Index relation, Index tail);

/// Scores of (h, r, t) for every relation r.
Eigen::VectorXd relation_scores(const KgModel& model, Index head, Index tail);
/// Scores of (h, r, t) for every entity t.
Eigen::VectorXd tail_scores(const KgModel& model, Index head, Index relation);

/// Max-shifted softmax of a score vector.
Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// Softmax of relation_scores(h, t) over the full relation set.
Eigen::VectorXd relation_softmax(const KgModel& model, Index head, Index tail);

/// Sum_r value(r) * P(r | h, t).
double expected_rating(const KgModel& model, Index head, Index tail,
                       const std::vector<double>& rating_values);

struct TrainResult {
  KgModel model;
  std::vector<double> epoch_loss;  // mean loss per training fact, one per epoch
};

/// Plain SGD over the facts of `triples` (shuffled per epoch from cfg.seed).
///
/// Every fact draws cfg.neg_entities corruptions (head or tail replaced by a
/// uniformly drawn different entity, coin flip per sample) and
/// cfg.neg_relations corruptions (relation replaced by a uniformly drawn
/// different relation). Multiplicative scoring minimizes the negative log of
/// the fact's softmax probability against all its corruptions in one
/// denominator; additive scoring minimizes sum max(0, margin + d(f) - d(f'))
/// with d = ||h + r - t||. Throws std::runtime_error when the loss stops
/// being finite.
TrainResult train(const TripleStore& triples, const KgConfig& cfg);

enum class EvalMode { relation, tail };

struct EvalMetrics {
  std::optional<double> rmse;        // relation mode only
  std::map<int, double> hits_at;     // K -> fraction with rank <= K
  double mr = 0.0;
  double mrr = 0.0;
  std::size_t count = 0;
};

/// Raw ranking of the true candidate among all relations (relation mode) or
/// all entities (tail mode), with average-rank tie handling. Relation mode
/// requires `rating_values`, one numeric value per relation, for RMSE.
EvalMetrics evaluate(const KgModel& model, const TripleStore& test, EvalMode mode,
                     const std::vector<int>& ks,
                     const std::optional<std::vector<double>>& rating_values, unsigned threads = 1);

/// 1 + #(scores strictly above target) + #(ties other than target) / 2.
double average_rank(const Eigen::VectorXd& scores, Index target);

/// Writes entities.vec, relations.vec and checkpoint.json into `dir`.
void save_checkpoint(const KgModel& model, const TripleStore& store, const KgConfig& cfg,
                     const std::filesystem::path& dir);

}  // namespace fusion_probe::kg
