#include "ppcreg/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ppcreg/errors.hpp"

namespace ppcreg {

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return is;
}

void write_f32le(std::ostream& os, const std::vector<float>& data) {
  std::vector<char> bytes(data.size() * 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto u = std::bit_cast<std::uint32_t>(data[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xFFu);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_f32le(std::istream& is, std::size_t count, const std::string& name) {
  std::vector<char> bytes(count * 4);
  is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size()) {
    throw Error(ErrorCode::kFormat, name + ": payload truncated");
  }
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kFormat, name + ": trailing bytes after payload");
  }
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

// Reads "key values..." lines up to "end"; returns key -> value tokens.
std::map<std::string, std::vector<std::string>> read_header(std::istream& is, const char* magic,
                                                            const std::string& name) {
  std::string line;
  if (!std::getline(is, line) || line != std::string(magic) + " 1") {
    throw Error(ErrorCode::kFormat, name + ": line 1: expected '" + magic + " 1'");
  }
  std::map<std::string, std::vector<std::string>> out;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line == "end") return out;
    std::istringstream ls(line);
    std::string key, tok;
    ls >> key;
    std::vector<std::string> vals;
    while (ls >> tok) vals.push_back(tok);
    if (key.empty() || vals.empty() || out.contains(key)) {
      throw Error(ErrorCode::kFormat, name + ": line " + std::to_string(line_no) + ": bad header line");
    }
    out[key] = vals;
  }
  throw Error(ErrorCode::kFormat, name + ": header without 'end'");
}

double to_double(const std::string& s, const std::string& name) {
  std::size_t used = 0;
  double v = std::numeric_limits<double>::quiet_NaN();
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::kFormat, name + ": bad number '" + s + "'");
  }
  return v;
}

std::vector<double> field(const std::map<std::string, std::vector<std::string>>& h,
                          const std::string& key, std::size_t n, const std::string& name) {
  auto it = h.find(key);
  if (it == h.end() || it->second.size() != n) {
    throw Error(ErrorCode::kFormat, name + ": header needs '" + key + "' with " + std::to_string(n) + " values");
  }
  std::vector<double> out;
  for (const auto& s : it->second) out.push_back(to_double(s, name));
  return out;
}

int to_int(double v, const std::string& name) {
  if (v != std::floor(v) || v < 1 || v > 1e6) throw Error(ErrorCode::kFormat, name + ": bad size");
  return static_cast<int>(v);
}

void check_type(const std::map<std::string, std::vector<std::string>>& h, const std::string& name) {
  auto it = h.find("type");
  if (it == h.end() || it->second != std::vector<std::string>{"f32le"}) {
    throw Error(ErrorCode::kFormat, name + ": unsupported data type (expected f32le)");
  }
}

}  // namespace

void write_volume(const std::filesystem::path& path, const Volume& v) {
  auto os = open_out(path);
  const auto& d = v.dims();
  os << "PPCVOL 1\n"
     << "dims " << d.x() << ' ' << d.y() << ' ' << d.z() << '\n'
     << "spacing " << fmt17(v.spacing().x()) << ' ' << fmt17(v.spacing().y()) << ' ' << fmt17(v.spacing().z()) << '\n'
     << "origin " << fmt17(v.origin().x()) << ' ' << fmt17(v.origin().y()) << ' ' << fmt17(v.origin().z()) << '\n'
     << "type f32le\nend\n";
  write_f32le(os, v.data());
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

Volume read_volume(const std::filesystem::path& path) {
  auto is = open_in(path);
  const std::string name = path.string();
  const auto h = read_header(is, "PPCVOL", name);
  check_type(h, name);
  const auto d = field(h, "dims", 3, name);
  const auto s = field(h, "spacing", 3, name);
  const auto o = field(h, "origin", 3, name);
  const Eigen::Vector3i dims(to_int(d[0], name), to_int(d[1], name), to_int(d[2], name));
  const std::size_t n = static_cast<std::size_t>(dims.x()) * dims.y() * dims.z();
  auto data = read_f32le(is, n, name);
  return Volume(dims, Vec3(s[0], s[1], s[2]), Vec3(o[0], o[1], o[2]), std::move(data));
}

void write_image(const std::filesystem::path& path, const Image2D& img) {
  auto os = open_out(path);
  os << "PPCIMG 1\n"
     << "width " << img.width << '\n'
     << "height " << img.height << '\n'
     << "pixel_spacing " << fmt17(img.pixel_spacing) << '\n'
     << "type f32le\nend\n";
  write_f32le(os, img.data);
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

Image2D read_image(const std::filesystem::path& path) {
  auto is = open_in(path);
  const std::string name = path.string();
  const auto h = read_header(is, "PPCIMG", name);
  check_type(h, name);
  Image2D img(to_int(field(h, "width", 1, name)[0], name), to_int(field(h, "height", 1, name)[0], name),
              field(h, "pixel_spacing", 1, name)[0]);
  img.data = read_f32le(is, img.data.size(), name);
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image2D& img) {
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (float x : img.data) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double range = hi > lo ? static_cast<double>(hi) - lo : 0.0;
  auto os = open_out(path);
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  std::vector<char> bytes(img.data.size() * 2);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const auto q = range > 0.0
        ? static_cast<std::uint16_t>(std::lround((img.data[i] - lo) / range * 65535.0))
        : std::uint16_t{0};
    bytes[2 * i] = static_cast<char>(q >> 8);
    bytes[2 * i + 1] = static_cast<char>(q & 0xFF);
  }
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

void write_pose(const std::filesystem::path& path, const RigidTransform& t) {
  auto os = open_out(path);
  const auto m = t.matrix3x4();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) os << fmt17(m(r, c)) << (c < 3 ? ' ' : '\n');
  }
  if (!os) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

RigidTransform read_pose(const std::filesystem::path& path) {
  auto is = open_in(path);
  const std::string name = path.string();
  Mat3 r;
  Vec3 t;
  std::string line;
  for (int row = 0; row < 3; ++row) {
    if (!std::getline(is, line)) {
      throw Error(ErrorCode::kFormat, name + ": line " + std::to_string(row + 1) + ": missing pose row");
    }
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (toks.size() != 4) {
      throw Error(ErrorCode::kFormat, name + ": line " + std::to_string(row + 1) + ": expected 4 numbers");
    }
    for (int c = 0; c < 3; ++c) r(row, c) = to_double(toks[c], name);
    t[row] = to_double(toks[3], name);
  }
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      throw Error(ErrorCode::kFormat, name + ": trailing content after pose");
    }
  }
  try {
    return RigidTransform(r, t);
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormat, name + ": " + e.what());
  }
}

}  // namespace ppcreg
