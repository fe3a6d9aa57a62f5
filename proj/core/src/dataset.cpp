#include "nfsense/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "nfsense/error.hpp"

namespace nfsense {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "raw array I/O assumes a little-endian host");

std::string_view to_string(DType dtype) {
  switch (dtype) {
    case DType::F64: return "f64";
    case DType::F32: return "f32";
    case DType::C128: return "c128";
    case DType::C64: return "c64";
    case DType::U8: return "u8";
  }
  return "?";
}

DType parse_dtype(std::string_view tag) {
  if (tag == "f64") return DType::F64;
  if (tag == "f32") return DType::F32;
  if (tag == "c128") return DType::C128;
  if (tag == "c64") return DType::C64;
  if (tag == "u8") return DType::U8;
  fail(ErrorKind::UnknownDtype, "unknown dtype tag '" + std::string(tag) + "'");
}

std::size_t element_bytes(DType dtype) {
  switch (dtype) {
    case DType::F64: return 8;
    case DType::F32: return 4;
    case DType::C128: return 16;
    case DType::C64: return 8;
    case DType::U8: return 1;
  }
  return 0;
}

bool is_complex(DType dtype) { return dtype == DType::C128 || dtype == DType::C64; }

namespace {

Index product(std::vector<Index> const& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(std::vector<Index> const& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? ", " : "") + std::to_string(shape[i]);
  return s + "]";
}

template <typename T>
void append_raw(std::vector<char>& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T load_raw(char const* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

} // namespace

std::optional<std::vector<Index>> DatasetManifest::expected_shape(std::string const& name) const {
  Index const L = grid.size();
  if (name == "sigma") return std::vector<Index>{samples, coils};
  if (name == "ktemporal") return std::vector<Index>{samples, field_terms + 1};
  if (name == "sens" || name == "sens_true") return std::vector<Index>{L, coils};
  if (name == "prescan") return std::vector<Index>{L, coils, echoes};
  if (name == "b0" || name == "b0_stderr" || name == "b0_beta" || name == "b0_true" || name == "mask_t" ||
      name == "mask_r" || name == "mask_true" || name == "kfilter" || name == "rho" || name == "rho_true" ||
      name == "bias")
    return std::vector<Index>{L};
  return std::nullopt;
}

std::string manifest_to_json(DatasetManifest const& m) {
  json j;
  j["version"] = m.version;
  j["grid"] = {{"dims", m.grid.dims}, {"fov_m", m.grid.fov}};
  j["counts"] = {{"samples", m.samples}, {"coils", m.coils}, {"field_terms", m.field_terms}, {"echoes", m.echoes}};
  j["echo_times_s"] = m.echo_times_s;
  j["field_model"] = {{"harmonic_order", m.harmonic_order},
                      {"global_term", m.global_term},
                      {"b0_unit", m.b0_unit},
                      {"k_unit", m.k_unit}};
  j["byte_order"] = m.byte_order;
  j["element_order"] = m.element_order;
  json arrays = json::object();
  for (auto const& [name, e] : m.arrays)
    arrays[name] = {{"file", e.file}, {"dtype", std::string(to_string(e.dtype))}, {"shape", e.shape}};
  j["arrays"] = arrays;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string const& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (json::exception const& e) {
    fail(ErrorKind::Io, std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
      fail(ErrorKind::VersionMismatch, "manifest version " + std::to_string(m.version) + " is not supported (expected " +
                                           std::to_string(kManifestVersion) + ")");
    m.grid.dims = j.at("grid").at("dims").get<std::array<Index, 3>>();
    m.grid.fov = j.at("grid").at("fov_m").get<std::array<double, 3>>();
    auto const& c = j.at("counts");
    m.samples = c.value("samples", Index{0});
    m.coils = c.value("coils", Index{0});
    m.field_terms = c.value("field_terms", Index{0});
    m.echoes = c.value("echoes", Index{0});
    m.echo_times_s = j.value("echo_times_s", std::vector<double>{});
    if (j.contains("field_model")) {
      auto const& f = j["field_model"];
      m.harmonic_order = f.value("harmonic_order", 1);
      m.global_term = f.value("global_term", false);
      m.b0_unit = f.value("b0_unit", std::string("rad/s"));
      m.k_unit = f.value("k_unit", std::string("rad/m^n"));
    }
    m.byte_order = j.value("byte_order", std::string("little"));
    m.element_order = j.value("element_order", std::string("x-fastest"));
    json const arrays = j.value("arrays", json::object());
    for (auto const& [name, e] : arrays.items()) {
      ArrayEntry entry;
      entry.file = e.at("file").get<std::string>();
      entry.dtype = parse_dtype(e.at("dtype").get<std::string>());
      entry.shape = e.at("shape").get<std::vector<Index>>();
      m.arrays[name] = entry;
    }
  } catch (json::exception const& e) {
    fail(ErrorKind::Io, std::string("malformed manifest: ") + e.what());
  }
  if (m.byte_order != "little") fail(ErrorKind::Io, "unsupported byte order '" + m.byte_order + "'");
  if (m.element_order != "x-fastest" && m.element_order != "row-major")
    fail(ErrorKind::Io, "unsupported element order '" + m.element_order + "'");
  m.grid.validate();
  return m;
}

// Trailing unit extents carry no layout information: [64, 1] == [64].
static std::vector<Index> squeeze(std::vector<Index> shape) {
  while (shape.size() > 1 && shape.back() == 1) shape.pop_back();
  return shape;
}

void validate_manifest(DatasetManifest const& m, fs::path const& dir) {
  for (auto const& [name, e] : m.arrays) {
    if (auto expected = m.expected_shape(name); expected && squeeze(*expected) != squeeze(e.shape))
      fail(ErrorKind::SizeMismatch, "array '" + name + "' has shape " + shape_string(e.shape) +
                                        " but the manifest counts imply " + shape_string(*expected));
    auto const file = dir / e.file;
    if (!fs::exists(file)) fail(ErrorKind::MissingFile, "array file '" + file.string() + "' does not exist");
    auto const want = static_cast<std::uintmax_t>(product(e.shape)) * element_bytes(e.dtype);
    auto const have = fs::file_size(file);
    if (have != want)
      fail(ErrorKind::SizeMismatch, "array file '" + file.string() + "' holds " + std::to_string(have) +
                                        " bytes, expected " + std::to_string(want) + " for shape " +
                                        shape_string(e.shape) + " " + std::string(to_string(e.dtype)));
  }
}

Dataset Dataset::open(fs::path const& dir) {
  auto const file = dir / "manifest.json";
  if (!fs::exists(file)) fail(ErrorKind::MissingFile, "no manifest.json in '" + dir.string() + "'");
  std::ifstream in(file);
  if (!in) fail(ErrorKind::Io, "cannot read '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  auto manifest = manifest_from_json(ss.str());
  validate_manifest(manifest, dir);
  return Dataset(dir, std::move(manifest));
}

Dataset Dataset::create(fs::path const& dir, DatasetManifest manifest) {
  manifest.grid.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create dataset directory '" + dir.string() + "': " + ec.message());
  Dataset ds(dir, std::move(manifest));
  ds.save_manifest();
  return ds;
}

ArrayEntry const& Dataset::entry(std::string const& name) const {
  auto it = manifest_.arrays.find(name);
  if (it == manifest_.arrays.end()) fail(ErrorKind::MissingFile, "dataset has no array named '" + name + "'");
  return it->second;
}

void Dataset::save_manifest() const {
  auto const file = dir_ / "manifest.json";
  std::ofstream out(file, std::ios::trunc);
  out << manifest_to_json(manifest_);
  if (!out) fail(ErrorKind::Io, "failed to write '" + file.string() + "'");
}

std::vector<char> Dataset::read_bytes(ArrayEntry const& e) const {
  auto const file = dir_ / e.file;
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFile, "cannot open array file '" + file.string() + "'");
  auto const want = static_cast<std::size_t>(product(e.shape)) * element_bytes(e.dtype);
  std::vector<char> bytes(want);
  in.read(bytes.data(), static_cast<std::streamsize>(want));
  if (static_cast<std::size_t>(in.gcount()) != want || in.peek() != std::char_traits<char>::eof())
    fail(ErrorKind::SizeMismatch, "array file '" + file.string() + "' does not match its declared shape");
  return bytes;
}

RealMatrix Dataset::read_real(std::string const& name) const {
  auto const& e = entry(name);
  if (is_complex(e.dtype)) fail(ErrorKind::UnknownDtype, "array '" + name + "' is complex, expected real");
  auto const bytes = read_bytes(e);
  Index const rows = e.shape.empty() ? 1 : e.shape.front();
  Index const n = product(e.shape);
  RealMatrix out(rows, rows == 0 ? 0 : n / rows);
  double* dst = out.data();
  for (Index i = 0; i < n; ++i) {
    char const* p = bytes.data() + i * static_cast<Index>(element_bytes(e.dtype));
    switch (e.dtype) {
      case DType::F64: dst[i] = load_raw<double>(p); break;
      case DType::F32: dst[i] = load_raw<float>(p); break;
      case DType::U8: dst[i] = static_cast<unsigned char>(*p); break;
      default: break;
    }
  }
  return out;
}

ComplexMatrix Dataset::read_complex(std::string const& name) const {
  auto const& e = entry(name);
  if (!is_complex(e.dtype)) fail(ErrorKind::UnknownDtype, "array '" + name + "' is real, expected complex");
  auto const bytes = read_bytes(e);
  Index const rows = e.shape.empty() ? 1 : e.shape.front();
  Index const n = product(e.shape);
  ComplexMatrix out(rows, rows == 0 ? 0 : n / rows);
  Cx* dst = out.data();
  bool const wide = e.dtype == DType::C128;
  for (Index i = 0; i < n; ++i) {
    if (wide) {
      char const* p = bytes.data() + i * 16;
      dst[i] = Cx(load_raw<double>(p), load_raw<double>(p + 8));
    } else {
      char const* p = bytes.data() + i * 8;
      dst[i] = Cx(load_raw<float>(p), load_raw<float>(p + 4));
    }
  }
  return out;
}

Mask Dataset::read_mask(std::string const& name) const {
  auto const& e = entry(name);
  if (e.dtype != DType::U8) fail(ErrorKind::UnknownDtype, "mask '" + name + "' must be stored as u8");
  auto const bytes = read_bytes(e);
  Mask out(static_cast<Index>(bytes.size()));
  for (Index i = 0; i < out.size(); ++i) out(i) = bytes[static_cast<std::size_t>(i)] != 0;
  return out;
}

PrescanData Dataset::read_prescan() const {
  auto const& e = entry("prescan");
  auto const stacked = read_complex("prescan");
  PrescanData out;
  Index const coils = e.shape.at(1);
  Index const echoes = e.shape.at(2);
  for (Index n = 0; n < echoes; ++n) out.echoes.push_back(stacked.middleCols(n * coils, coils));
  out.te_s = manifest_.echo_times_s;
  out.validate();
  return out;
}

void Dataset::write_entry(std::string const& name, ArrayEntry entry, std::vector<char> const& bytes) {
  auto const file = dir_ / entry.file;
  {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::Io, "failed to write '" + file.string() + "'");
  }
  manifest_.arrays[name] = std::move(entry);
  save_manifest();
}

void Dataset::write_real(std::string const& name, RealMatrix const& values, DType storage) {
  require(!is_complex(storage), "real array '" + name + "' needs a real storage dtype");
  if (!values.allFinite()) fail(ErrorKind::InvalidArgument, "refusing to save non-finite values in '" + name + "'");
  std::vector<char> bytes;
  bytes.reserve(static_cast<std::size_t>(values.size()) * element_bytes(storage));
  for (Index i = 0; i < values.size(); ++i) {
    double const v = values.data()[i];
    switch (storage) {
      case DType::F64: append_raw(bytes, v); break;
      case DType::F32: append_raw(bytes, static_cast<float>(v)); break;
      case DType::U8: append_raw(bytes, static_cast<std::uint8_t>(v)); break;
      default: break;
    }
  }
  std::vector<Index> shape{values.rows()};
  if (values.cols() != 1) shape.push_back(values.cols());
  write_entry(name, {name + "." + std::string(to_string(storage)), storage, shape}, bytes);
}

void Dataset::write_complex(std::string const& name, ComplexMatrix const& values, DType storage) {
  require(is_complex(storage), "complex array '" + name + "' needs a complex storage dtype");
  if (!values.allFinite()) fail(ErrorKind::InvalidArgument, "refusing to save non-finite values in '" + name + "'");
  std::vector<char> bytes;
  bytes.reserve(static_cast<std::size_t>(values.size()) * element_bytes(storage));
  for (Index i = 0; i < values.size(); ++i) {
    Cx const v = values.data()[i];
    if (storage == DType::C128) {
      append_raw(bytes, v.real());
      append_raw(bytes, v.imag());
    } else {
      append_raw(bytes, static_cast<float>(v.real()));
      append_raw(bytes, static_cast<float>(v.imag()));
    }
  }
  std::vector<Index> shape{values.rows()};
  if (values.cols() != 1) shape.push_back(values.cols());
  write_entry(name, {name + "." + std::string(to_string(storage)), storage, shape}, bytes);
}

void Dataset::write_mask(std::string const& name, Mask const& values) {
  std::vector<char> bytes(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) bytes[static_cast<std::size_t>(i)] = values(i) ? 1 : 0;
  write_entry(name, {name + ".u8", DType::U8, {values.size()}}, bytes);
}

void Dataset::write_prescan(PrescanData const& prescan, DType storage) {
  prescan.validate();
  Index const L = prescan.voxels();
  Index const coils = prescan.coils();
  ComplexMatrix stacked(L, coils * prescan.echo_count());
  for (Index n = 0; n < prescan.echo_count(); ++n)
    stacked.middleCols(n * coils, coils) = prescan.echoes[static_cast<std::size_t>(n)];
  manifest_.echoes = prescan.echo_count();
  manifest_.echo_times_s = prescan.te_s;
  if (manifest_.coils == 0) manifest_.coils = coils;
  write_complex("prescan", stacked, storage);
  manifest_.arrays["prescan"].shape = {L, coils, prescan.echo_count()};
  save_manifest();
}

} // namespace nfsense
