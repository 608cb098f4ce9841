#include "kinfuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Var;

namespace {
constexpr std::string_view kFusionMagic = "KIFM";
constexpr std::uint32_t kFusionVersion = 1;
}  // namespace

HeadKind parse_head_kind(std::string_view name) {
  if (name == "baseline") return HeadKind::Baseline;
  if (name == "concat") return HeadKind::Concat;
  if (name == "parallel-max" || name == "max") return HeadKind::ParallelMax;
  if (name == "simple-sum") return HeadKind::SimpleSum;
  if (name == "weighted-sum") return HeadKind::WeightedSum;
  throw ValidationError("unknown head kind '" + std::string(name) + "'");
}

std::string_view head_kind_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::Baseline: return "baseline";
    case HeadKind::Concat: return "concat";
    case HeadKind::ParallelMax: return "parallel-max";
    case HeadKind::SimpleSum: return "simple-sum";
    case HeadKind::WeightedSum: return "weighted-sum";
  }
  return "baseline";
}

std::string question_slot(const McqItem& item) {
  if (item.context && !item.context->empty()) return *item.context + " " + item.question;
  return item.question;
}

std::vector<std::string> passages_for(const McqItem& item, std::size_t option) {
  std::vector<std::string> out;
  if (item.premises && option < item.premises->size()) {
    for (const auto& s : (*item.premises)[option]) out.push_back(s.text);
  }
  if (out.empty()) out.emplace_back();
  return out;
}

namespace {

bool has_passages(const McqItem& item, std::size_t option) {
  return item.premises && option < item.premises->size() && !(*item.premises)[option].empty();
}

std::string joined_premises(const McqItem& item, std::size_t option) {
  std::vector<std::string> parts;
  if (item.premises && option < item.premises->size()) {
    for (const auto& s : (*item.premises)[option]) parts.push_back(s.text);
  }
  return text::join(parts, " ");
}

}  // namespace

void FusionModel::init_head(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0xF05E1EAD5EEDULL);
  const auto d = static_cast<Eigen::Index>(dim_);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(static_cast<double>(dim_)));
  auto column = [&]() {
    Matrix m(d, 1);
    for (Eigen::Index i = 0; i < d; ++i) m(i, 0) = nd(rng);
    return m;
  };
  score_w_ = Parameter("head.score.w", column());
  score_b_ = Parameter("head.score.b", Matrix::Zero(1, 1));
  weight_w_ = Parameter("head.weight.w", column());
  weight_b_ = Parameter("head.weight.b", Matrix::Zero(1, 1));
}

FusionModel FusionModel::with_encoder(EncoderModel encoder, HeadKind head, bool tied, std::uint64_t seed) {
  FusionModel m;
  m.head_ = head;
  m.tied_ = tied && head == HeadKind::WeightedSum;
  m.dim_ = encoder.dim();
  m.encoder_ = std::move(encoder);
  m.init_head(seed);
  return m;
}

FusionModel FusionModel::with_vectors(std::shared_ptr<const ExternalVectorStore> vectors, HeadKind head, bool tied,
                                      std::uint64_t seed) {
  if (!vectors || vectors->dim() == 0) throw ValidationError("external vector store is empty");
  FusionModel m;
  m.head_ = head;
  m.tied_ = tied && head == HeadKind::WeightedSum;
  m.dim_ = vectors->dim();
  m.vectors_ = std::move(vectors);
  m.init_head(seed);
  return m;
}

std::vector<Parameter*> FusionModel::parameters(bool include_encoder) {
  std::vector<Parameter*> out;
  if (include_encoder && encoder_) out = encoder_->encoder_parameters();
  if (head_ == HeadKind::WeightedSum) {
    out.push_back(&weight_w_);
    out.push_back(&weight_b_);
    if (!tied_) {
      out.push_back(&score_w_);
      out.push_back(&score_b_);
    }
  } else {
    out.push_back(&score_w_);
    out.push_back(&score_b_);
  }
  return out;
}

std::vector<TokenSequence> FusionModel::option_sequences(const McqItem& item, std::size_t option) const {
  if (!encoder_) throw ValidationError("model has no built-in encoder");
  const auto q = question_slot(item);
  const auto& a = item.options.at(option);
  const auto& vocab = encoder_->vocab();
  const auto max_len = encoder_->config().max_len;
  switch (head_) {
    case HeadKind::Baseline:
      return {build_sequence("", q, a, vocab, max_len)};
    case HeadKind::Concat:
      return {build_sequence(joined_premises(item, option), q, a, vocab, max_len)};
    default: {
      std::vector<TokenSequence> out;
      for (const auto& k : passages_for(item, option)) out.push_back(build_sequence(k, q, a, vocab, max_len));
      return out;
    }
  }
}

Var FusionModel::pooled_var(Tape& tape, const McqItem& item, std::size_t option, std::optional<std::size_t> passage,
                            const std::string& knowledge, bool encoder_trainable) {
  if (!encoder_) {
    const auto& v = vectors_->lookup(item.id, option, passage);
    return tape.constant(v.transpose());
  }
  auto seq = build_sequence(knowledge, question_slot(item), item.options[option], encoder_->vocab(),
                            encoder_->config().max_len);
  if (encoder_trainable) return encoder_->pooled(tape, seq);
  return tape.constant(encoder_->encode(seq).transpose());
}

Var FusionModel::linear(Tape& tape, Var x, Parameter& w, Parameter& b) {
  return tape.add(tape.matmul(x, tape.param(w)), tape.param(b));
}

Var FusionModel::score_var(Tape& tape, const McqItem& item, bool encoder_trainable,
                           std::vector<std::vector<double>>* weights_out) {
  item.validate();
  const bool trainable = encoder_trainable && encoder_.has_value();
  std::vector<Var> option_scores;
  option_scores.reserve(item.n_options());
  if (weights_out) weights_out->clear();
  for (std::size_t i = 0; i < item.n_options(); ++i) {
    switch (head_) {
      case HeadKind::Baseline: {
        auto p = pooled_var(tape, item, i, std::nullopt, std::string(), trainable);
        option_scores.push_back(linear(tape, p, score_weight(), score_bias()));
        break;
      }
      case HeadKind::Concat: {
        auto p = pooled_var(tape, item, i, std::nullopt, joined_premises(item, i), trainable);
        option_scores.push_back(linear(tape, p, score_weight(), score_bias()));
        break;
      }
      case HeadKind::ParallelMax:
      case HeadKind::SimpleSum:
      case HeadKind::WeightedSum: {
        const auto passages = passages_for(item, i);
        const bool real = has_passages(item, i);
        std::vector<Var> pooled;
        pooled.reserve(passages.size());
        for (std::size_t j = 0; j < passages.size(); ++j) {
          pooled.push_back(pooled_var(tape, item, i, real ? std::optional<std::size_t>(j) : std::nullopt,
                                      passages[j], trainable));
        }
        if (head_ == HeadKind::ParallelMax) {
          std::vector<Var> per_passage;
          for (auto p : pooled) per_passage.push_back(linear(tape, p, score_weight(), score_bias()));
          option_scores.push_back(tape.max_entry(tape.hstack(per_passage)));
        } else if (head_ == HeadKind::SimpleSum) {
          option_scores.push_back(linear(tape, tape.sum(pooled), score_weight(), score_bias()));
        } else {
          std::vector<Var> raw;
          for (auto p : pooled) raw.push_back(linear(tape, p, weight_w_, weight_b_));
          auto w = tape.softmax_rows(tape.hstack(raw));
          auto summary = tape.matmul(w, tape.vstack(pooled));
          option_scores.push_back(linear(tape, summary, score_weight(), score_bias()));
          if (weights_out) {
            const auto& wv = tape.value(w);
            weights_out->emplace_back(wv.data(), wv.data() + wv.size());
          }
        }
        break;
      }
    }
  }
  return tape.hstack(option_scores);
}

OptionScores FusionModel::score(const McqItem& item) const {
  Tape tape;
  auto& self = const_cast<FusionModel&>(*this);
  std::vector<std::vector<double>> weights;
  auto s = self.score_var(tape, item, false, &weights);
  OptionScores out;
  const auto& v = tape.value(s);
  out.scores.assign(v.data(), v.data() + v.size());
  for (std::size_t i = 1; i < out.scores.size(); ++i) {
    if (out.scores[i] > out.scores[out.predicted]) out.predicted = i;
  }
  if (head_ == HeadKind::WeightedSum) out.weights = std::move(weights);
  return out;
}

double FusionModel::loss(const McqItem& item) const {
  if (!item.gold) throw ValidationError("item " + item.id + " has no gold label");
  Tape tape;
  auto& self = const_cast<FusionModel&>(*this);
  auto s = self.score_var(tape, item, false);
  const std::size_t target[] = {*item.gold};
  return tape.scalar(tape.cross_entropy(s, target));
}

namespace {

OptionScores score_checked(const FusionModel& model, const McqItem& item, HeadKind expected) {
  if (model.head() != expected) {
    throw ValidationError("model head is " + std::string(head_kind_name(model.head())) + ", expected " +
                          std::string(head_kind_name(expected)));
  }
  return model.score(item);
}

}  // namespace

OptionScores score_baseline(const FusionModel& model, const McqItem& item) {
  return score_checked(model, item, HeadKind::Baseline);
}
OptionScores score_concat(const FusionModel& model, const McqItem& item) {
  return score_checked(model, item, HeadKind::Concat);
}
OptionScores score_max(const FusionModel& model, const McqItem& item) {
  return score_checked(model, item, HeadKind::ParallelMax);
}
OptionScores score_simple_sum(const FusionModel& model, const McqItem& item) {
  return score_checked(model, item, HeadKind::SimpleSum);
}
OptionScores score_weighted_sum(const FusionModel& model, const McqItem& item) {
  return score_checked(model, item, HeadKind::WeightedSum);
}

FusionModel train(FusionModel model, const McqDataset& dataset, const TrainConfig& config, FusionTrainLog* log) {
  config.validate();
  if (!dataset.has_gold()) throw ValidationError("training requires gold labels on every item");
  if (!model.has_encoder() && !config.freeze_encoder) {
    throw ValidationError("cannot backpropagate into an external vector store; set freeze_encoder");
  }
  const bool trainable = model.has_encoder() && !config.freeze_encoder;
  MomentumSgd opt(model.parameters(trainable), config.learning_rate, config.momentum, config.max_grad_norm);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Tape tape;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      opt.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const auto& item = dataset.items[order[b]];
        tape.clear();
        auto s = model.score_var(tape, item, trainable);
        const std::size_t target[] = {*item.gold};
        auto loss = tape.cross_entropy(s, target);
        loss_sum += tape.scalar(loss);
        const auto& sv = tape.value(s);
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < sv.cols(); ++k) {
          if (sv(0, k) > sv(0, best)) best = k;
        }
        if (static_cast<std::size_t>(best) == *item.gold) ++correct;
        tape.backward(loss, 1.0 / static_cast<double>(end - start));
      }
      opt.step();
    }
    if (log) {
      log->epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
      log->epoch_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));
    }
  }
  opt.zero_grad();
  return model;
}

double gradient_relative_error(double analytic, double numeric, double floor) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(FusionModel& model, const McqItem& item, double step) {
  if (!item.gold) throw ValidationError("grad_check needs a gold label");
  auto params = model.parameters(true);
  for (auto* p : params) p->zero_grad();
  Tape tape;
  auto s = model.score_var(tape, item, true);
  const std::size_t target[] = {*item.gold};
  auto loss = tape.cross_entropy(s, target);
  if (!std::isfinite(tape.scalar(loss))) throw ValidationError("non-finite loss");
  tape.backward(loss);

  GradCheckResult result;
  for (auto* p : params) {
    const Matrix analytic = p->grad;
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      const double orig = p->value(i);
      p->value(i) = orig + step;
      const double up = model.loss(item);
      p->value(i) = orig - step;
      const double down = model.loss(item);
      p->value(i) = orig;
      if (!std::isfinite(up) || !std::isfinite(down)) throw ValidationError("non-finite loss");
      const double numeric = (up - down) / (2.0 * step);
      const double err = gradient_relative_error(analytic(i), numeric);
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name;
      }
    }
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

// ---------------------------------------------------------------------------

namespace {

void write_param(io::BinaryWriter& w, const Parameter& p) {
  w.str(p.name);
  w.u64(static_cast<std::uint64_t>(p.value.rows()));
  w.u64(static_cast<std::uint64_t>(p.value.cols()));
  for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.value.cols(); ++c) w.f64(p.value(r, c));
  }
}

void read_param(io::BinaryReader& r, Parameter& p) {
  if (r.str() != p.name) throw ValidationError("fusion checkpoint: unexpected parameter order");
  auto rows = static_cast<Eigen::Index>(r.u64());
  auto cols = static_cast<Eigen::Index>(r.u64());
  if (rows != p.value.rows() || cols != p.value.cols()) throw ValidationError("fusion checkpoint: shape mismatch");
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) p.value(i, j) = r.f64();
  }
  p.zero_grad();
}

}  // namespace

std::string FusionModel::serialize() const {
  io::BinaryWriter w;
  w.bytes(kFusionMagic);
  w.u32(kFusionVersion);
  w.u32(static_cast<std::uint32_t>(head_));
  w.u32(tied_ ? 1 : 0);
  w.u32(encoder_ ? 0 : 1);
  w.u64(dim_);
  if (encoder_) w.str(encoder_->serialize());
  io::BinaryWriter head;
  for (const auto* p : {&score_w_, &score_b_, &weight_w_, &weight_b_}) write_param(head, *p);
  w.section(head);
  return w.data();
}

FusionModel FusionModel::deserialize(std::string_view bytes, std::shared_ptr<const ExternalVectorStore> vectors) {
  io::BinaryReader r(bytes, "fusion checkpoint");
  if (r.bytes(kFusionMagic.size()) != kFusionMagic) throw ValidationError("fusion checkpoint: bad magic");
  if (auto v = r.u32(); v != kFusionVersion) {
    throw ValidationError("fusion checkpoint: unsupported version " + std::to_string(v));
  }
  auto head = r.u32();
  if (head > static_cast<std::uint32_t>(HeadKind::WeightedSum)) throw ValidationError("fusion checkpoint: bad head");
  const bool tied = r.u32() != 0;
  const bool external = r.u32() != 0;
  const auto dim = r.u64();
  FusionModel m;
  if (external) {
    if (!vectors) throw ValidationError("fusion checkpoint uses external vectors; none supplied");
    if (vectors->dim() != dim) throw ValidationError("external vector dimension does not match checkpoint");
    m = with_vectors(std::move(vectors), static_cast<HeadKind>(head), tied, 0);
  } else {
    m = with_encoder(EncoderModel::deserialize(r.str()), static_cast<HeadKind>(head), tied, 0);
  }
  auto head_sec = r.section();
  for (auto* p : {&m.score_w_, &m.score_b_, &m.weight_w_, &m.weight_b_}) read_param(head_sec, *p);
  if (!r.done()) throw ValidationError("fusion checkpoint: trailing bytes");
  return m;
}

void FusionModel::save(const std::filesystem::path& path) const { io::write_file(path, serialize()); }

FusionModel FusionModel::load(const std::filesystem::path& path, std::shared_ptr<const ExternalVectorStore> vectors) {
  return deserialize(io::read_file(path), std::move(vectors));
}

}  // namespace kinfuse
