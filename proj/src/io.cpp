#include "invaria/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

namespace invaria {

static_assert(std::endian::native == std::endian::little, "PTSB1 I/O assumes a little-endian host");

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ >= bytes_.size(); }

  void skip_space() {
    while (pos_ < bytes_.size() && (bytes_[pos_] == ' ' || bytes_[pos_] == '\t' || bytes_[pos_] == '\r' ||
                                    bytes_[pos_] == '\n')) {
      ++pos_;
    }
  }

  void skip_inline_space() {
    while (pos_ < bytes_.size() && (bytes_[pos_] == ' ' || bytes_[pos_] == '\t' || bytes_[pos_] == '\r')) ++pos_;
  }

  std::string_view token() {
    skip_inline_space();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && bytes_[pos_] != ' ' && bytes_[pos_] != '\t' && bytes_[pos_] != '\n' &&
           bytes_[pos_] != '\r') {
      ++pos_;
    }
    return bytes_.substr(start, pos_ - start);
  }

  void expect_newline() {
    skip_inline_space();
    if (pos_ >= bytes_.size() || bytes_[pos_] != '\n') throw ParseError("expected end of header line", pos_);
    ++pos_;
  }

  template <class T>
  T number(std::string_view what) {
    skip_space();
    const std::size_t start = pos_;
    const std::string_view tok = token();
    T value{};
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (tok.empty() || ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw ParseError("invalid " + std::string(what) + " '" + std::string(tok) + "'", start);
    }
    return value;
  }

  void read_raw(void* dst, std::size_t n) {
    if (bytes_.size() - pos_ < n) throw ParseError("truncated binary payload", pos_);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void append_float(std::string& out, float v) {
  char buf[sizeof(float)];
  std::memcpy(buf, &v, sizeof(float));
  out.append(buf, sizeof(float));
}

}  // namespace

std::string serialize_pts(const PointCloud& pc, PtsFormat format) {
  pc.validate();
  const Index n = pc.size();
  const Index c = pc.feature_dim();
  const bool labeled = pc.has_labels();
  std::string out = (format == PtsFormat::kBinary ? "PTSB1 " : "PTS1 ") + std::to_string(n) + " " +
                    std::to_string(c) + " " + (labeled ? "1" : "0") + "\n";
  if (format == PtsFormat::kBinary) {
    out.reserve(out.size() + static_cast<std::size_t>(n * (3 + c + (labeled ? 1 : 0))) * 4);
    for (Index i = 0; i < n; ++i) {
      for (int d = 0; d < 3; ++d) append_float(out, static_cast<float>(pc.coords(i, d)));
      for (Index f = 0; f < c; ++f) append_float(out, static_cast<float>(pc.feats(i, f)));
      if (labeled) {
        const std::int32_t l = pc.labels[static_cast<std::size_t>(i)];
        char buf[4];
        std::memcpy(buf, &l, 4);
        out.append(buf, 4);
      }
    }
    return out;
  }
  char buf[64];
  for (Index i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) {
      std::snprintf(buf, sizeof buf, d == 0 ? "%.9g" : " %.9g", static_cast<double>(static_cast<float>(pc.coords(i, d))));
      out += buf;
    }
    for (Index f = 0; f < c; ++f) {
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(static_cast<float>(pc.feats(i, f))));
      out += buf;
    }
    if (labeled) out += " " + std::to_string(pc.labels[static_cast<std::size_t>(i)]);
    out += '\n';
  }
  return out;
}

PointCloud parse_pts(std::string_view bytes) {
  Cursor cur(bytes);
  const std::string_view magic = cur.token();
  bool binary = false;
  if (magic == "PTSB1") {
    binary = true;
  } else if (magic != "PTS1") {
    throw ParseError("unknown point-file magic '" + std::string(magic) + "'", 0);
  }
  const std::size_t n_at = cur.offset();
  const auto n = cur.number<long long>("point count");
  if (n < 1) throw ParseError("point count must be >= 1", n_at);
  const std::size_t c_at = cur.offset();
  const auto c = cur.number<long long>("feature count");
  if (c < 0) throw ParseError("feature count must be >= 0", c_at);
  const std::size_t l_at = cur.offset();
  const auto has_labels = cur.number<int>("label flag");
  if (has_labels != 0 && has_labels != 1) throw ParseError("label flag must be 0 or 1", l_at);
  cur.expect_newline();

  PointCloud pc;
  pc.coords.resize(n, 3);
  pc.feats.resize(n, c);
  if (has_labels) pc.labels.resize(static_cast<std::size_t>(n));

  for (Index i = 0; i < n; ++i) {
    if (binary) {
      float v;
      for (int d = 0; d < 3; ++d) {
        cur.read_raw(&v, 4);
        pc.coords(i, d) = v;
      }
      for (Index f = 0; f < c; ++f) {
        cur.read_raw(&v, 4);
        pc.feats(i, f) = v;
      }
      if (has_labels) {
        std::int32_t l;
        cur.read_raw(&l, 4);
        pc.labels[static_cast<std::size_t>(i)] = l;
      }
    } else {
      cur.skip_space();
      if (cur.at_end()) throw ParseError("truncated text payload: expected " + std::to_string(n) + " points", cur.offset());
      for (int d = 0; d < 3; ++d) pc.coords(i, d) = static_cast<float>(cur.number<double>("coordinate"));
      for (Index f = 0; f < c; ++f) pc.feats(i, f) = static_cast<float>(cur.number<double>("feature"));
      if (has_labels) pc.labels[static_cast<std::size_t>(i)] = cur.number<int>("label");
    }
  }
  try {
    pc.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), cur.offset());
  }
  return pc;
}

PointCloud load_pts(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  try {
    return parse_pts(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

void save_pts(const std::filesystem::path& path, const PointCloud& pc, PtsFormat format) {
  write_file_atomic(path, serialize_pts(pc, format));
}

PointCloud round_to_storage_precision(const PointCloud& pc) {
  PointCloud out = pc;
  out.coords = pc.coords.cast<float>().cast<double>();
  out.feats = pc.feats.cast<float>().cast<double>();
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return std::move(ss).str();
}

}  // namespace invaria
