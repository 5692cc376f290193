#include "scnn/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "scnn/text.hpp"

namespace scnn {

namespace {

constexpr char kMagic[4] = {'S', 'P', 'X', 'T'};
constexpr std::size_t kHeaderBytes = 20;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(in[at + static_cast<std::size_t>(k)]) << (8 * k);
  return v;
}

std::uint32_t to_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kDimensionOverflow, std::string(what) + " does not fit in 32 bits");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + 4 * t.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kTensorVersion);
  put_u32(out, to_u32(t.rows(), "H"));
  put_u32(out, to_u32(t.cols(), "W"));
  put_u32(out, to_u32(t.channels(), "C"));
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "tensor holds a non-finite value");
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

DenseTensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "tensor file does not start with SPXT");
  }
  if (bytes.size() < kHeaderBytes) throw Error(ErrorCode::kTruncated, "tensor header is incomplete");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTensorVersion) throw Error(ErrorCode::kBadVersion, "tensor version " + std::to_string(version));

  const std::uint64_t h = get_u32(bytes, 8), w = get_u32(bytes, 12), c = get_u32(bytes, 16);
  // Each factor is < 2^32, so the pairwise products are checked one at a time.
  const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() - kHeaderBytes) / 4;
  if ((w != 0 && h > limit / w) || (c != 0 && h * w > limit / c)) {
    throw Error(ErrorCode::kDimensionOverflow, "tensor dims overflow");
  }
  const std::uint64_t count = h * w * c;
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  if (payload < 4 * count) {
    throw Error(ErrorCode::kTruncated, "tensor payload has " + std::to_string(payload) + " bytes, expected " +
                                           std::to_string(4 * count));
  }
  if (payload > 4 * count) {
    throw Error(ErrorCode::kMalformed, "tensor file has " + std::to_string(payload - 4 * count) + " trailing bytes");
  }
  std::vector<double> data(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const float f = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * k));
    if (!std::isfinite(f)) throw Error(ErrorCode::kNonFinite, "value " + std::to_string(k) + " is not finite");
    data[k] = f;
  }
  return DenseTensor(Shape{h, w, c}, std::move(data));
}

void write_tensor(const std::string& path, const DenseTensor& t) {
  const auto bytes = encode_tensor(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

DenseTensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

DenseTensor parse_tensor_csv(const std::string& text) {
  std::istringstream in(text);
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::kMalformed, "CSV tensor is empty");
  const auto dims = split(trim(header), ',');
  std::size_t h = 0, w = 0, c = 0;
  if (dims.size() != 3 || !parse_size(dims[0], h) || !parse_size(dims[1], w) || !parse_size(dims[2], c)) {
    throw Error(ErrorCode::kMalformed, "CSV header must be H,W,C");
  }
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    for (const auto& field : split(line, ',')) {
      if (trim(field).empty()) continue;
      double v = 0;
      if (!parse_double(field, v)) throw Error(ErrorCode::kMalformed, "bad CSV value '" + field + "'");
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "CSV value '" + field + "'");
      values.push_back(v);
    }
  }
  if (values.size() != h * w * c) {
    throw Error(ErrorCode::kTruncated, "CSV holds " + std::to_string(values.size()) + " values, header needs " +
                                           std::to_string(h * w * c));
  }
  return DenseTensor(Shape{h, w, c}, std::move(values));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

DenseTensor read_tensor_csv(const std::string& path) { return parse_tensor_csv(read_text_file(path)); }

DenseTensor load_tensor(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0) return read_tensor_csv(path);
  return read_tensor(path);
}

std::string format_bundle(const SparseBundle<double>& b) {
  b.validate();
  std::string out = std::to_string(b.n_max) + " " + std::to_string(b.channels) + " " + std::to_string(b.grid_h) +
                    " " + std::to_string(b.grid_w) + "\n";
  for (std::size_t i = 0; i < b.n_max; ++i) {
    out += std::to_string(b.hash[i].h) + " " + std::to_string(b.hash[i].w);
    for (std::size_t c = 0; c < b.channels; ++c) {
      const double v = b.feature(i, c);
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "bundle feature is not finite");
      out += " " + format_real(v);
    }
    out += "\n";
  }
  return out;
}

SparseBundle<double> parse_bundle(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fields = [](const std::string& l) {
    std::vector<std::string> out;
    std::istringstream ls(l);
    std::string f;
    while (ls >> f) out.push_back(f);
    return out;
  };
  if (!std::getline(in, line)) throw Error(ErrorCode::kMalformed, "bundle file is empty");
  const auto head = fields(line);
  SparseBundle<double> b;
  if (head.size() != 4 || !parse_size(head[0], b.n_max) || !parse_size(head[1], b.channels) ||
      !parse_size(head[2], b.grid_h) || !parse_size(head[3], b.grid_w)) {
    throw Error(ErrorCode::kMalformed, "bundle header must be 'n_max C grid_h grid_w'");
  }
  b.feat.reserve(b.n_max * b.channels);
  for (std::size_t i = 0; i < b.n_max; ++i) {
    if (!std::getline(in, line)) {
      throw Error(ErrorCode::kTruncated, "bundle has " + std::to_string(i) + " slot lines, header says " +
                                             std::to_string(b.n_max));
    }
    const auto f = fields(line);
    if (f.size() != 2 + b.channels) {
      throw Error(ErrorCode::kMalformed, "slot line " + std::to_string(i) + " needs " +
                                             std::to_string(2 + b.channels) + " fields");
    }
    long long h = 0, w = 0;
    if (!parse_int(f[0], h) || !parse_int(f[1], w) || h < 0 || w < 0 || h > std::numeric_limits<std::int32_t>::max() ||
        w > std::numeric_limits<std::int32_t>::max()) {
      throw Error(ErrorCode::kMalformed, "slot line " + std::to_string(i) + " has a bad coordinate");
    }
    b.hash.push_back({static_cast<std::int32_t>(h), static_cast<std::int32_t>(w)});
    for (std::size_t c = 0; c < b.channels; ++c) {
      double v = 0;
      if (!parse_double(f[2 + c], v)) throw Error(ErrorCode::kMalformed, "bad feature '" + f[2 + c] + "'");
      if (!std::isfinite(v)) throw Error(ErrorCode::kNonFinite, "feature '" + f[2 + c] + "'");
      b.feat.push_back(v);
    }
  }
  while (std::getline(in, line)) {
    if (!trim(line).empty()) throw Error(ErrorCode::kMalformed, "bundle has more than n_max slot lines");
  }
  b.validate();
  return b;
}

void write_bundle(const std::string& path, const SparseBundle<double>& b) { write_text_file(path, format_bundle(b)); }

SparseBundle<double> read_bundle(const std::string& path) { return parse_bundle(read_text_file(path)); }

}  // namespace scnn
