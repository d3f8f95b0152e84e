#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "memop/error.hpp"
#include "memop/io.hpp"
#include "memop/lstm.hpp"
#include "memop/optim.hpp"
#include "memop/text.hpp"
#include "memop/training.hpp"

namespace memop {

// Run settings stored next to the weights.
struct CheckpointMeta {
  double clip = 5.0;
  double lr0 = 0.01;
  long epochs = 0;
  std::uint64_t seed = 0;
  Target target = Target::Integral;
};

template <class Scalar>
constexpr const char* scalar_name() {
  return std::is_same_v<Scalar, float> ? "float" : "double";
}

inline std::string to_string(Target t) { return t == Target::Integral ? "integral" : "next_step"; }

template <class Scalar>
std::string format_checkpoint(const TrainState<Scalar>& st, const CheckpointMeta& meta) {
  const auto& m = st.model;
  std::string s = "memop-checkpoint 1\n";
  s += std::string("scalar ") + scalar_name<Scalar>() + "\n";
  s += "input " + std::to_string(m.input_size()) + "\n";
  s += "hidden";
  for (int h : m.hidden_sizes()) s += " " + std::to_string(h);
  s += "\noutput " + std::to_string(m.output_size()) + "\n";
  s += "seed " + std::to_string(m.seed) + "\n";
  s += "train.seed " + std::to_string(meta.seed) + "\n";
  s += "target " + to_string(meta.target) + "\n";
  s += "clip " + format_real(meta.clip) + "\n";
  s += "lr0 " + format_real(meta.lr0) + "\n";
  s += "epochs " + std::to_string(meta.epochs) + "\n";
  s += "adam " + std::to_string(st.opt.step_count) + " " + format_real(st.opt.beta1) + " " +
       format_real(st.opt.beta2) + " " + format_real(st.opt.eps) + "\n";
  auto emit = [&s](const std::string& name, const auto& t) {
    s += "tensor " + name + " " + std::to_string(t.rows()) + " " + std::to_string(t.cols()) + "\n";
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        if (c) s += ' ';
        s += format_real(t(r, c));
      }
      s += '\n';
    }
  };
  zip_tensors([&](const std::string& name, auto& p, auto& a, auto& b) {
    emit("model." + name, p);
    emit("adam.m." + name, a);
    emit("adam.v." + name, b);
  }, st.model, st.opt.m, st.opt.v);
  const auto& r = st.report;
  s += "report " + std::to_string(r.epochs_done()) + "\n";
  for (long e = 0; e < r.epochs_done(); ++e) {
    s += std::to_string(e) + " " + format_real(r.train_loss[e]) + " " + format_real(r.val_loss[e]) + " " +
         format_real(r.lr[e]) + "\n";
  }
  s += "end\n";
  return s;
}

namespace detail {

class LineReader {
 public:
  LineReader(std::string_view text, std::string source) : lines_(lines_of(text)), source_(std::move(source)) {}

  // Next line split on spaces; the first field must equal `key`.
  std::vector<std::string_view> expect(std::string_view key, std::size_t min_fields = 1) {
    auto f = fields();
    if (f.empty() || f[0] != key) fail("expected '" + std::string(key) + "'");
    if (f.size() < min_fields) fail("too few fields after '" + std::string(key) + "'");
    return f;
  }

  std::vector<std::string_view> fields() {
    if (next_ >= lines_.size()) fail("unexpected end of file");
    cur_ = ++next_;
    std::vector<std::string_view> out;
    for (auto p : split(lines_[next_ - 1], ' ')) {
      if (!p.empty()) out.push_back(p);
    }
    return out;
  }

  template <class T>
  T number(std::string_view s) {
    try {
      return parse_number<T>(s, "value");
    } catch (const FormatError& e) {
      fail(e.what());
    }
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(source_ + ":" + std::to_string(cur_) + ": " + msg);
  }

 private:
  std::vector<std::string_view> lines_;
  std::string source_;
  std::size_t next_ = 0;
  std::size_t cur_ = 0;
};

}  // namespace detail

// Reads only the declared scalar type, so callers can dispatch.
inline std::string checkpoint_scalar(std::string_view text, const std::string& source) {
  detail::LineReader in(text, source);
  const auto head = in.expect("memop-checkpoint", 2);
  if (head[1] != "1") in.fail("unsupported checkpoint version");
  const auto f = in.expect("scalar", 2);
  if (f[1] != "float" && f[1] != "double") in.fail("unknown scalar type '" + std::string(f[1]) + "'");
  return std::string(f[1]);
}

template <class Scalar>
TrainState<Scalar> parse_checkpoint(std::string_view text, const std::string& source, CheckpointMeta* meta_out = nullptr) {
  detail::LineReader in(text, source);
  if (checkpoint_scalar(text, source) != scalar_name<Scalar>()) {
    throw FormatError(source + ": checkpoint holds " + checkpoint_scalar(text, source) + " parameters, expected " +
                      scalar_name<Scalar>());
  }
  in.expect("memop-checkpoint");
  in.expect("scalar");
  const int input = in.number<int>(in.expect("input", 2)[1]);
  const auto hf = in.expect("hidden", 2);
  std::vector<int> hidden;
  for (std::size_t k = 1; k < hf.size(); ++k) hidden.push_back(in.number<int>(hf[k]));
  const int output = in.number<int>(in.expect("output", 2)[1]);
  TrainState<Scalar> st;
  try {
    st.model = RnnModel<Scalar>::zeros(input, hidden, output);
  } catch (const ShapeError& e) {
    in.fail(e.what());
  }
  st.model.seed = in.number<std::uint64_t>(in.expect("seed", 2)[1]);
  CheckpointMeta meta;
  meta.seed = in.number<std::uint64_t>(in.expect("train.seed", 2)[1]);
  const auto tg = in.expect("target", 2)[1];
  if (tg == "integral") meta.target = Target::Integral;
  else if (tg == "next_step") meta.target = Target::NextStep;
  else in.fail("unknown target '" + std::string(tg) + "'");
  meta.clip = in.number<double>(in.expect("clip", 2)[1]);
  meta.lr0 = in.number<double>(in.expect("lr0", 2)[1]);
  meta.epochs = in.number<long>(in.expect("epochs", 2)[1]);
  const auto ad = in.expect("adam", 5);
  st.opt = AdamState<Scalar>::for_model(st.model, meta.lr0 > 0.0 ? meta.lr0 : 1.0);
  st.opt.lr0 = meta.lr0;
  st.opt.step_count = in.number<std::uint64_t>(ad[1]);
  st.opt.beta1 = in.number<double>(ad[2]);
  st.opt.beta2 = in.number<double>(ad[3]);
  st.opt.eps = in.number<double>(ad[4]);

  auto read = [&](const std::string& name, auto& t) {
    const auto f = in.expect("tensor", 4);
    if (f[1] != name) in.fail("expected tensor " + name + ", found " + std::string(f[1]));
    const auto rows = in.number<Eigen::Index>(f[2]);
    const auto cols = in.number<Eigen::Index>(f[3]);
    if (rows != t.rows() || cols != t.cols()) {
      in.fail("tensor " + name + " declared " + std::to_string(rows) + "x" + std::to_string(cols) + ", model needs " +
              std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto v = in.fields();
      if (static_cast<Eigen::Index>(v.size()) != cols) in.fail("tensor " + name + ": wrong number of values in row");
      for (Eigen::Index c = 0; c < cols; ++c) t(r, c) = in.number<Scalar>(v[static_cast<std::size_t>(c)]);
    }
  };
  zip_tensors([&](const std::string& name, auto& p, auto& a, auto& b) {
    read("model." + name, p);
    read("adam.m." + name, a);
    read("adam.v." + name, b);
  }, st.model, st.opt.m, st.opt.v);

  const long n = in.number<long>(in.expect("report", 2)[1]);
  for (long e = 0; e < n; ++e) {
    const auto f = in.fields();
    if (f.size() != 4 || in.number<long>(f[0]) != e) in.fail("malformed report row");
    st.report.train_loss.push_back(in.number<double>(f[1]));
    st.report.val_loss.push_back(in.number<double>(f[2]));
    st.report.lr.push_back(in.number<double>(f[3]));
  }
  in.expect("end");
  if (meta_out) *meta_out = meta;
  return st;
}

template <class Scalar>
void save_checkpoint(const TrainState<Scalar>& st, const CheckpointMeta& meta, const fs::path& path) {
  atomic_write(path, format_checkpoint(st, meta));
}

template <class Scalar>
TrainState<Scalar> load_checkpoint(const fs::path& path, CheckpointMeta* meta = nullptr) {
  return parse_checkpoint<Scalar>(read_file(path), path.string(), meta);
}

inline std::string format_report_csv(const TrainReport& r) {
  std::string s = "epoch,train_loss,val_loss,lr\n";
  for (long e = 0; e < r.epochs_done(); ++e) {
    s += std::to_string(e) + "," + format_real(r.train_loss[e]) + "," + format_real(r.val_loss[e]) + "," +
         format_real(r.lr[e]) + "\n";
  }
  return s;
}

}  // namespace memop
