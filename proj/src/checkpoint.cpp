#include <cstring>
#include <fstream>
#include <sstream>

#include "gapcoref/error.hpp"
#include "gapcoref/trainer.hpp"

namespace gapcoref {

namespace {

constexpr char kMagic[5] = {'C', 'S', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  template <typename T>
  void put(T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes(buf, sizeof(T));
  }
  void str(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void matrix(const Matrix& m) {
    put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
    bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  const std::string& data() const { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}
  void bytes(void* out, std::size_t n) {
    if (n > data_.size() - pos_) throw Error(ErrorCode::CorruptCheckpoint, "unexpected end of checkpoint");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string str() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Matrix matrix() {
    const auto rows = get<std::uint32_t>();
    const auto cols = get<std::uint32_t>();
    if (static_cast<std::uint64_t>(rows) * cols * sizeof(double) > data_.size() - pos_) {
      throw Error(ErrorCode::CorruptCheckpoint, "matrix larger than the remaining checkpoint");
    }
    Matrix m(rows, cols);
    bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

void write_params(Writer& w, const ParameterList& params) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.str(p->name);
    w.matrix(p->value);
  }
}

void read_params(Reader& r, const ParameterList& params) {
  const auto n = r.get<std::uint32_t>();
  if (n != params.size()) throw Error(ErrorCode::CorruptCheckpoint, "parameter count differs from the model layout");
  for (Parameter* p : params) {
    const std::string name = r.str();
    if (name != p->name) throw Error(ErrorCode::CorruptCheckpoint, "expected parameter " + p->name + ", found " + name);
    Matrix m = r.matrix();
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw Error(ErrorCode::CorruptCheckpoint, "parameter " + name + " has the wrong shape");
    }
    p->value = std::move(m);
  }
}

}  // namespace

void save_checkpoint(const FoldModel& model, const std::filesystem::path& path) {
  FoldModel& m = const_cast<FoldModel&>(model);
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.kind));
  w.put<std::int32_t>(model.window);
  w.put<std::int32_t>(model.max_seq_len);
  w.put<std::int32_t>(model.max_answer_len);
  w.put<std::int32_t>(model.backbone.hidden_dim());

  const bool has_encoder = model.backbone.has_encoder();
  w.put<std::uint8_t>(has_encoder ? 1 : 0);
  if (has_encoder) {
    const EncoderConfig& c = model.backbone.encoder().config;
    for (int v : {c.num_layers, c.hidden_dim, c.num_heads, c.ffn_dim, c.max_positions, c.vocab_size, c.output_layer}) {
      w.put<std::int32_t>(v);
    }
    w.put<std::uint64_t>(c.seed);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(c.frozen_layers.size()));
    for (int l : c.frozen_layers) w.put<std::int32_t>(l);
    write_params(w, m.backbone.encoder().parameters());
  }

  switch (model.kind) {
    case ModelKind::QA: {
      if (!model.qa_head) throw Error(ErrorCode::BadConfig, "QA model without a head");
      write_params(w, m.qa_head->parameters());
      w.put<std::uint8_t>(model.lr ? 1 : 0);
      if (model.lr) {
        w.matrix(model.lr->weights);
        w.matrix(model.lr->bias.transpose());
        w.put<double>(model.lr->C);
      }
      break;
    }
    case ModelKind::MC:
      if (!model.mc_head) throw Error(ErrorCode::BadConfig, "MC model without a head");
      write_params(w, m.mc_head->parameters());
      break;
    case ModelKind::Seq:
      if (!model.seq_head) throw Error(ErrorCode::BadConfig, "Seq model without a head");
      w.put<std::int32_t>(static_cast<std::int32_t>(model.seq_head->hidden_w.value.cols()));
      w.put<double>(model.seq_head->dropout);
      write_params(w, m.seq_head->parameters());
      break;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(w.data().data(), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

FoldModel load_checkpoint(const std::filesystem::path& path, std::shared_ptr<const EmbeddingStore> external) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  Reader r(buf.str());

  char magic[5];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorCode::CorruptCheckpoint, "bad checkpoint magic");
  if (r.get<std::uint32_t>() != kVersion) throw Error(ErrorCode::CorruptCheckpoint, "unsupported checkpoint version");

  FoldModel model;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 2) throw Error(ErrorCode::CorruptCheckpoint, "unknown model kind");
  model.kind = static_cast<ModelKind>(kind);
  model.window = r.get<std::int32_t>();
  model.max_seq_len = r.get<std::int32_t>();
  model.max_answer_len = r.get<std::int32_t>();
  const int hidden = r.get<std::int32_t>();

  if (r.get<std::uint8_t>() != 0) {
    EncoderConfig c;
    c.num_layers = r.get<std::int32_t>();
    c.hidden_dim = r.get<std::int32_t>();
    c.num_heads = r.get<std::int32_t>();
    c.ffn_dim = r.get<std::int32_t>();
    c.max_positions = r.get<std::int32_t>();
    c.vocab_size = r.get<std::int32_t>();
    c.output_layer = r.get<std::int32_t>();
    c.seed = r.get<std::uint64_t>();
    const auto n_frozen = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_frozen; ++i) c.frozen_layers.insert(r.get<std::int32_t>());
    EncoderParams params = [&] {
      try {
        return init_params(c);
      } catch (const Error& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("invalid encoder config: ") + e.what());
      }
    }();
    read_params(r, params.parameters());
    model.backbone = Backbone::from_encoder(std::move(params));
  } else {
    if (!external) throw Error(ErrorCode::BadConfig, "checkpoint was trained on external embeddings; supply them");
    if (external->hidden_dim() != hidden) throw Error(ErrorCode::DimensionMismatch, "external embedding width differs");
    model.backbone = Backbone::from_store(std::move(external));
  }

  switch (model.kind) {
    case ModelKind::QA: {
      model.qa_head = QaHead::init(hidden, 0);
      read_params(r, model.qa_head->parameters());
      if (r.get<std::uint8_t>() != 0) {
        LrModel lr;
        const Matrix w = r.matrix();
        const Matrix b = r.matrix();
        if (w.rows() != 3 || w.cols() != 6 || b.rows() != 1 || b.cols() != 3) {
          throw Error(ErrorCode::CorruptCheckpoint, "calibration model has the wrong shape");
        }
        lr.weights = w;
        lr.bias = b.transpose();
        lr.C = r.get<double>();
        model.lr = lr;
      }
      break;
    }
    case ModelKind::MC:
      model.mc_head = McHead::init(hidden, 0);
      read_params(r, model.mc_head->parameters());
      break;
    case ModelKind::Seq: {
      const int units = r.get<std::int32_t>();
      const double dropout = r.get<double>();
      if (units < 1 || !(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::CorruptCheckpoint, "bad seq head");
      model.seq_head = SeqHead::init(hidden, units, dropout, 0);
      read_params(r, model.seq_head->parameters());
      break;
    }
  }
  if (!r.done()) throw Error(ErrorCode::CorruptCheckpoint, "trailing bytes in checkpoint");
  return model;
}

}  // namespace gapcoref
