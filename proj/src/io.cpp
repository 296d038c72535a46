#include "gscenes/io.hpp"

#include <json.hpp>
#include <png.h>

#include <Eigen/SVD>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace gscenes {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// bytes

std::vector<std::uint8_t> read_bytes(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError(path.string(), 0, "cannot open for reading");
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return buf;
}

void write_bytes(const fs::path &path, const void *data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError(path.string(), 0, "cannot open for writing");
  out.write(static_cast<const char *>(data), static_cast<std::streamsize>(size));
  if (!out)
    throw IoError(path.string(), 0, "write failed");
}

void write_text(const fs::path &path, const std::string &text) { write_bytes(path, text.data(), text.size()); }

std::string read_text(const fs::path &path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

std::string hash_file(const fs::path &path) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto byte : read_bytes(path)) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace {

// Cursor over an in-memory file that reports offsets in its errors.
struct Reader {
  const std::vector<std::uint8_t> &buf;
  std::string file;
  std::size_t pos = 0;

  std::string line() {
    const std::size_t start = pos;
    while (pos < buf.size() && buf[pos] != '\n')
      ++pos;
    if (pos >= buf.size())
      throw IoError(file, start, "unterminated header line");
    std::string s(buf.begin() + start, buf.begin() + pos);
    ++pos;
    if (!s.empty() && s.back() == '\r')
      s.pop_back();
    return s;
  }

  void need(std::size_t n, const std::string &what) const {
    if (buf.size() - pos < n)
      throw IoError(file, pos, "truncated payload: " + what);
  }

  template <typename T> T take() {
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
};

std::vector<std::string> split_ws(const std::string &s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok)
    out.push_back(tok);
  return out;
}

enum class PlyType { kI8, kU8, kI16, kU16, kI32, kU32, kF32, kF64 };

std::optional<PlyType> parse_ply_type(const std::string &t) {
  if (t == "char" || t == "int8")
    return PlyType::kI8;
  if (t == "uchar" || t == "uint8")
    return PlyType::kU8;
  if (t == "short" || t == "int16")
    return PlyType::kI16;
  if (t == "ushort" || t == "uint16")
    return PlyType::kU16;
  if (t == "int" || t == "int32")
    return PlyType::kI32;
  if (t == "uint" || t == "uint32")
    return PlyType::kU32;
  if (t == "float" || t == "float32")
    return PlyType::kF32;
  if (t == "double" || t == "float64")
    return PlyType::kF64;
  return std::nullopt;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
  case PlyType::kI8:
  case PlyType::kU8:
    return 1;
  case PlyType::kI16:
  case PlyType::kU16:
    return 2;
  case PlyType::kI32:
  case PlyType::kU32:
  case PlyType::kF32:
    return 4;
  case PlyType::kF64:
    return 8;
  }
  return 0;
}

double read_ply_value(Reader &r, PlyType t) {
  switch (t) {
  case PlyType::kI8:
    return r.take<std::int8_t>();
  case PlyType::kU8:
    return r.take<std::uint8_t>();
  case PlyType::kI16:
    return r.take<std::int16_t>();
  case PlyType::kU16:
    return r.take<std::uint16_t>();
  case PlyType::kI32:
    return r.take<std::int32_t>();
  case PlyType::kU32:
    return r.take<std::uint32_t>();
  case PlyType::kF32:
    return r.take<float>();
  case PlyType::kF64:
    return r.take<double>();
  }
  return 0;
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::pair<std::string, PlyType>> props;
  std::size_t header_offset = 0;
};

} // namespace

const std::vector<double> &PlyVertices::column(const std::string &name) const {
  const auto it = columns.find(name);
  if (it == columns.end())
    throw IoError(path, 0, "missing vertex property '" + name + "'");
  return it->second;
}

PlyVertices read_ply_vertices(const fs::path &path) {
  const auto buf = read_bytes(path);
  Reader r{buf, path.string()};
  if (buf.size() < 4 || r.line() != "ply")
    throw IoError(r.file, 0, "bad magic: not a PLY file");

  std::vector<PlyElement> elements;
  bool format_ok = false;
  for (;;) {
    const std::size_t at = r.pos;
    const std::string ln = r.line();
    const auto tok = split_ws(ln);
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info")
      continue;
    if (tok[0] == "end_header")
      break;
    if (tok[0] == "format") {
      if (tok.size() < 2 || tok[1] != "binary_little_endian")
        throw IoError(r.file, at, "unsupported PLY format '" + (tok.size() > 1 ? tok[1] : "") +
                                      "' (binary_little_endian required)");
      format_ok = true;
    } else if (tok[0] == "element") {
      if (tok.size() != 3)
        throw IoError(r.file, at, "malformed element line");
      PlyElement e;
      e.name = tok[1];
      try {
        e.count = std::stoull(tok[2]);
      } catch (const std::exception &) {
        throw IoError(r.file, at, "malformed element count");
      }
      e.header_offset = at;
      elements.push_back(e);
    } else if (tok[0] == "property") {
      if (elements.empty())
        throw IoError(r.file, at, "property before any element");
      if (tok.size() >= 2 && tok[1] == "list")
        throw IoError(r.file, at, "list properties are not supported");
      if (tok.size() != 3)
        throw IoError(r.file, at, "malformed property line");
      const auto t = parse_ply_type(tok[1]);
      if (!t)
        throw IoError(r.file, at, "unknown property type '" + tok[1] + "'");
      elements.back().props.emplace_back(tok[2], *t);
    } else {
      throw IoError(r.file, at, "unexpected header keyword '" + tok[0] + "'");
    }
  }
  if (!format_ok)
    throw IoError(r.file, 0, "missing format line");

  PlyVertices out;
  out.path = r.file;
  bool found = false;
  for (const auto &e : elements) {
    std::size_t stride = 0;
    for (const auto &p : e.props)
      stride += ply_type_size(p.second);
    if (stride != 0 && e.count > buf.size() / stride)
      throw IoError(r.file, r.pos, "truncated payload: element '" + e.name + "' larger than file");
    if (e.name != "vertex") {
      r.need(stride * e.count, "element '" + e.name + "'");
      r.pos += stride * e.count;
      continue;
    }
    found = true;
    out.count = e.count;
    for (const auto &p : e.props) {
      if (out.columns.count(p.first))
        throw IoError(r.file, e.header_offset, "duplicate property '" + p.first + "'");
      out.names.push_back(p.first);
      out.columns[p.first].resize(e.count);
    }
    r.need(stride * e.count, "vertex data");
    for (std::size_t i = 0; i < e.count; ++i)
      for (const auto &p : e.props)
        out.columns[p.first][i] = read_ply_value(r, p.second);
    break;
  }
  if (!found)
    throw IoError(r.file, 0, "no vertex element");
  return out;
}

namespace {

std::vector<std::string> splat_property_names(int sh_degree) {
  std::vector<std::string> n = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
  if (sh_degree == 3)
    for (int i = 0; i < 45; ++i)
      n.push_back("f_rest_" + std::to_string(i));
  n.push_back("opacity");
  for (int i = 0; i < 3; ++i)
    n.push_back("scale_" + std::to_string(i));
  for (int i = 0; i < 4; ++i)
    n.push_back("rot_" + std::to_string(i));
  return n;
}

void write_vertex_ply(const fs::path &path, const std::vector<std::pair<std::string, std::string>> &props,
                      std::size_t count, const std::vector<std::uint8_t> &payload) {
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\nelement vertex " << count << "\n";
  for (const auto &[type, name] : props)
    h << "property " << type << " " << name << "\n";
  h << "end_header\n";
  const std::string head = h.str();
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.insert(bytes.end(), payload.begin(), payload.end());
  write_bytes(path, bytes.data(), bytes.size());
}

template <typename T> void put(std::vector<std::uint8_t> &buf, T v) {
  const auto *p = reinterpret_cast<const std::uint8_t *>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

} // namespace

GaussianCloud read_ply(const fs::path &path) {
  const PlyVertices v = read_ply_vertices(path);
  GaussianCloud cloud;
  cloud.sh_degree = v.has("f_rest_0") ? 3 : 0;
  // check everything up front so the error names the first missing property
  for (const auto &name : splat_property_names(cloud.sh_degree))
    if (name[0] != 'n')
      (void)v.column(name);
  const int coeffs = cloud.coeff_count();
  cloud.splats.resize(v.count);
  const auto &x = v.column("x"), &y = v.column("y"), &z = v.column("z");
  for (std::size_t i = 0; i < v.count; ++i) {
    auto &s = cloud.splats[i];
    s.position = Vec3(x[i], y[i], z[i]);
    s.sh = ShCoeffs::Zero(3, coeffs);
    for (int c = 0; c < 3; ++c) {
      s.sh(c, 0) = v.column("f_dc_" + std::to_string(c))[i];
      for (int j = 0; j + 1 < coeffs; ++j)
        s.sh(c, j + 1) = v.column("f_rest_" + std::to_string(c * 15 + j))[i];
    }
    s.logit_opacity = v.column("opacity")[i];
    for (int k = 0; k < 3; ++k)
      s.log_scale(k) = v.column("scale_" + std::to_string(k))[i];
    for (int k = 0; k < 4; ++k)
      s.rotation(k) = v.column("rot_" + std::to_string(k))[i];
  }
  try {
    cloud.validate();
  } catch (const InvalidArgument &e) {
    throw IoError(v.path, 0, e.what());
  }
  return cloud;
}

void write_ply(const fs::path &path, const GaussianCloud &cloud) {
  cloud.validate();
  const auto names = splat_property_names(cloud.sh_degree);
  std::vector<std::pair<std::string, std::string>> props;
  for (const auto &n : names)
    props.emplace_back("float", n);
  const int coeffs = cloud.coeff_count();
  std::vector<std::uint8_t> payload;
  payload.reserve(cloud.size() * names.size() * 4);
  for (const auto &s : cloud.splats) {
    for (int k = 0; k < 3; ++k)
      put(payload, static_cast<float>(s.position(k)));
    for (int k = 0; k < 3; ++k)
      put(payload, 0.0f);
    for (int c = 0; c < 3; ++c)
      put(payload, static_cast<float>(s.sh(c, 0)));
    for (int c = 0; c < 3 && coeffs > 1; ++c)
      for (int j = 0; j < 15; ++j)
        put(payload, static_cast<float>(s.sh(c, j + 1)));
    put(payload, static_cast<float>(s.logit_opacity));
    for (int k = 0; k < 3; ++k)
      put(payload, static_cast<float>(s.log_scale(k)));
    for (int k = 0; k < 4; ++k)
      put(payload, static_cast<float>(s.rotation(k)));
  }
  write_vertex_ply(path, props, cloud.size(), payload);
}

ColoredPoints read_points(const fs::path &path) {
  const PlyVertices v = read_ply_vertices(path);
  ColoredPoints pts;
  const auto &x = v.column("x"), &y = v.column("y"), &z = v.column("z");
  const bool has_color = v.has("red") && v.has("green") && v.has("blue");
  double color_scale = 1.0 / 255.0;
  if (has_color) {
    // float colors are already in [0,1]
    double mx = 0;
    for (const char *c : {"red", "green", "blue"})
      for (double val : v.column(c))
        mx = std::max(mx, val);
    if (mx <= 1.0)
      color_scale = 1.0;
  }
  for (std::size_t i = 0; i < v.count; ++i) {
    pts.positions.emplace_back(x[i], y[i], z[i]);
    if (has_color)
      pts.colors.emplace_back(v.column("red")[i] * color_scale, v.column("green")[i] * color_scale,
                              v.column("blue")[i] * color_scale);
    else
      pts.colors.emplace_back(0.5, 0.5, 0.5);
  }
  return pts;
}

void write_points(const fs::path &path, const ColoredPoints &pts) {
  if (pts.colors.size() != pts.positions.size())
    throw InvalidArgument("write_points: colors and positions differ in length");
  std::vector<std::pair<std::string, std::string>> props = {
      {"float", "x"}, {"float", "y"}, {"float", "z"}, {"uchar", "red"}, {"uchar", "green"}, {"uchar", "blue"}};
  std::vector<std::uint8_t> payload;
  for (std::size_t i = 0; i < pts.positions.size(); ++i) {
    for (int k = 0; k < 3; ++k)
      put(payload, static_cast<float>(pts.positions[i](k)));
    for (int k = 0; k < 3; ++k)
      put(payload, static_cast<std::uint8_t>(std::lround(std::clamp(pts.colors[i](k), 0.0, 1.0) * 255.0)));
  }
  write_vertex_ply(path, props, pts.positions.size(), payload);
}

// ---------------------------------------------------------------------------
// PFM

std::string pfm_header(int width, int height) {
  return "Pf\n" + std::to_string(width) + " " + std::to_string(height) + "\n-1.0\n";
}

Image read_pfm(const fs::path &path) {
  const auto buf = read_bytes(path);
  Reader r{buf, path.string()};
  const std::string magic = r.line();
  if (magic == "PF")
    throw IoError(r.file, 0, "color PFM ('PF') is not supported; grayscale 'Pf' required");
  if (magic != "Pf")
    throw IoError(r.file, 0, "bad magic: not a grayscale PFM");
  const std::size_t dims_at = r.pos;
  const auto dims = split_ws(r.line());
  int w = 0, h = 0;
  try {
    if (dims.size() != 2)
      throw std::invalid_argument("dims");
    w = std::stoi(dims[0]);
    h = std::stoi(dims[1]);
  } catch (const std::exception &) {
    throw IoError(r.file, dims_at, "malformed dimensions line");
  }
  if (w <= 0 || h <= 0)
    throw IoError(r.file, dims_at, "non-positive dimensions");
  const std::size_t scale_at = r.pos;
  double scale = 0;
  try {
    scale = std::stod(r.line());
  } catch (const std::exception &) {
    throw IoError(r.file, scale_at, "malformed scale line");
  }
  if (scale == 0 || !std::isfinite(scale))
    throw IoError(r.file, scale_at, "invalid scale");
  const bool big = scale > 0;
  r.need(static_cast<std::size_t>(w) * h * 4, "pixel data");
  Image img(w, h);
  for (int row = 0; row < h; ++row)
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = r.take<std::uint32_t>();
      if (big)
        bits = __builtin_bswap32(bits);
      img.at(x, h - 1 - row) = std::bit_cast<float>(bits);
    }
  return img;
}

void write_pfm(const fs::path &path, const Image &map) {
  if (map.channels != 1)
    throw InvalidArgument("write_pfm: single-channel map required");
  if (map.width <= 0 || map.height <= 0)
    throw InvalidArgument("write_pfm: empty map");
  const std::string head = pfm_header(map.width, map.height);
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  bytes.reserve(head.size() + map.pixels() * 4);
  for (int row = 0; row < map.height; ++row)
    for (int x = 0; x < map.width; ++x) {
      const double v = map.at(x, map.height - 1 - row);
      if (std::isnan(v))
        throw InvalidArgument("write_pfm: NaN at (" + std::to_string(x) + ", " +
                              std::to_string(map.height - 1 - row) + ")");
      put(bytes, static_cast<float>(v));
    }
  write_bytes(path, bytes.data(), bytes.size());
}

// ---------------------------------------------------------------------------
// f32

std::vector<float> read_f32(const fs::path &path) {
  const auto buf = read_bytes(path);
  if (buf.size() % 4 != 0)
    throw IoError(path.string(), buf.size() - buf.size() % 4, "truncated float32 tensor");
  std::vector<float> out(buf.size() / 4);
  std::memcpy(out.data(), buf.data(), buf.size());
  return out;
}

void write_f32(const fs::path &path, const std::vector<float> &values) {
  write_bytes(path, values.data(), values.size() * sizeof(float));
}

// ---------------------------------------------------------------------------
// PNG

Image read_png(const fs::path &path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  const std::string file = path.string();
  if (!png_image_begin_read_from_file(&image, file.c_str()))
    throw IoError(file, 0, std::string("png: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(file, 0, "png: " + msg);
  }
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  Image img(w, h, 3);
  for (std::size_t i = 0; i < img.data.size(); ++i)
    img.data[i] = buf[i] / 255.0;
  return img;
}

void write_png(const fs::path &path, const Image &img) {
  if (img.channels != 1 && img.channels != 3)
    throw InvalidArgument("write_png: 1 or 3 channels required");
  if (img.width <= 0 || img.height <= 0)
    throw InvalidArgument("write_png: empty image");
  std::vector<png_byte> buf(img.data.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const double v = std::isfinite(img.data[i]) ? std::clamp(img.data[i], 0.0, 1.0) : 0.0;
    buf[i] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::string file = path.string();
  if (!png_image_write_to_file(&image, file.c_str(), 0, buf.data(), 0, nullptr))
    throw IoError(file, 0, std::string("png: ") + image.message);
}

// ---------------------------------------------------------------------------
// cameras

Mat3 sanitize_rotation(const Mat3 &r) {
  if (!r.allFinite())
    throw InvalidArgument("rotation has non-finite entries");
  if (r.determinant() < 0)
    throw InvalidArgument("rotation has negative determinant (reflection)");
  const double err = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > kRotationRejectTolerance)
    throw InvalidArgument("rotation is not orthonormal (error " + std::to_string(err) + ")");
  if (err <= kRotationExactTolerance)
    return r;
  Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

namespace {

double num(const json &j, const char *key, const std::string &file, std::size_t index) {
  if (!j.contains(key) || !j[key].is_number())
    throw IoError(file, 0, std::string("camera ") + std::to_string(index) + ": missing numeric '" + key + "'");
  return j[key].get<double>();
}

} // namespace

std::vector<CameraRecord> read_camera_records(const fs::path &path) {
  const std::string file = path.string();
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error &e) {
    throw IoError(file, e.byte, std::string("invalid JSON: ") + e.what());
  }
  const json *list = &doc;
  std::string default_conv = kConventionForwardPlusZ;
  if (doc.is_object()) {
    if (doc.contains("convention"))
      default_conv = doc["convention"].get<std::string>();
    if (!doc.contains("cameras") || !doc["cameras"].is_array())
      throw IoError(file, 0, "missing 'cameras' array");
    list = &doc["cameras"];
  }
  if (!list->is_array())
    throw IoError(file, 0, "camera file must be an object or an array");
  std::vector<CameraRecord> out;
  for (std::size_t i = 0; i < list->size(); ++i) {
    const json &c = (*list)[i];
    if (!c.is_object())
      throw IoError(file, 0, "camera " + std::to_string(i) + " is not an object");
    CameraRecord rec;
    CameraView &v = rec.view;
    v.width = static_cast<int>(num(c, "width", file, i));
    v.height = static_cast<int>(num(c, "height", file, i));
    v.fx = num(c, "fx", file, i);
    v.fy = num(c, "fy", file, i);
    v.cx = num(c, "cx", file, i);
    v.cy = num(c, "cy", file, i);
    if (!c.contains("rotation") || !c["rotation"].is_array() || c["rotation"].size() != 9)
      throw IoError(file, 0, "camera " + std::to_string(i) + ": 'rotation' must hold 9 numbers");
    if (!c.contains("translation") || !c["translation"].is_array() || c["translation"].size() != 3)
      throw IoError(file, 0, "camera " + std::to_string(i) + ": 'translation' must hold 3 numbers");
    Mat3 r;
    Vec3 t;
    try {
      for (int k = 0; k < 9; ++k)
        r(k / 3, k % 3) = c["rotation"][k].get<double>();
      for (int k = 0; k < 3; ++k)
        t(k) = c["translation"][k].get<double>();
    } catch (const json::exception &) {
      throw IoError(file, 0, "camera " + std::to_string(i) + ": non-numeric pose entry");
    }
    const std::string conv = c.value("convention", default_conv);
    if (conv == kConventionForwardMinusZ) {
      // camera looks down -z with y up: flip y and z to reach the internal frame
      const Mat3 flip = Eigen::Vector3d(1, -1, -1).asDiagonal();
      r = flip * r;
      t = flip * t;
    } else if (conv != kConventionForwardPlusZ) {
      throw IoError(file, 0, "camera " + std::to_string(i) + ": unknown convention '" + conv + "'");
    }
    try {
      v.rotation = sanitize_rotation(r);
      v.translation = t;
      v.validate();
    } catch (const InvalidArgument &e) {
      throw IoError(file, 0, "camera " + std::to_string(i) + ": " + e.what());
    }
    rec.image = c.value("image", std::string());
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<CameraView> read_cameras(const fs::path &path) {
  std::vector<CameraView> out;
  for (auto &r : read_camera_records(path))
    out.push_back(r.view);
  return out;
}

void write_camera_records(const fs::path &path, const std::vector<CameraRecord> &cams) {
  json list = json::array();
  for (const auto &rec : cams) {
    const CameraView &v = rec.view;
    json c;
    c["width"] = v.width;
    c["height"] = v.height;
    c["fx"] = v.fx;
    c["fy"] = v.fy;
    c["cx"] = v.cx;
    c["cy"] = v.cy;
    json r = json::array(), t = json::array();
    for (int k = 0; k < 9; ++k)
      r.push_back(v.rotation(k / 3, k % 3));
    for (int k = 0; k < 3; ++k)
      t.push_back(v.translation(k));
    c["rotation"] = r;
    c["translation"] = t;
    c["convention"] = kConventionForwardPlusZ;
    if (!rec.image.empty())
      c["image"] = rec.image;
    list.push_back(c);
  }
  json doc;
  doc["cameras"] = list;
  write_text(path, doc.dump(2) + "\n");
}

void write_cameras(const fs::path &path, const std::vector<CameraView> &cams) {
  std::vector<CameraRecord> recs;
  for (const auto &c : cams)
    recs.push_back({c, {}});
  write_camera_records(path, recs);
}

// ---------------------------------------------------------------------------
// RGBD

RgbdImage read_rgbd(const fs::path &png, const fs::path &depth_pfm) {
  RgbdImage out;
  out.rgb = read_png(png);
  if (!depth_pfm.empty() && fs::exists(depth_pfm)) {
    out.depth = read_pfm(depth_pfm);
    if (out.depth.width != out.rgb.width || out.depth.height != out.rgb.height)
      throw IoError(depth_pfm.string(), 0, "depth dimensions differ from the color image");
  } else {
    out.depth = Image(out.rgb.width, out.rgb.height);
  }
  return out;
}

void write_rgbd(const fs::path &png, const fs::path &depth_pfm, const RgbdImage &img) {
  write_png(png, img.rgb);
  write_pfm(depth_pfm, img.depth);
}

} // namespace gscenes
