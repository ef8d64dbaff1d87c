#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "lumbarseg/volume.hpp"

namespace lseg {
namespace {

namespace fs = std::filesystem;

struct MhdHeader {
  Dims3 dims;
  Spacing3 spacing;
  std::string element_type;
  std::string data_file;
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

size_t element_size(const std::string& type) {
  if (type == "MET_UCHAR") return 1;
  if (type == "MET_SHORT" || type == "MET_USHORT") return 2;
  if (type == "MET_FLOAT") return 4;
  if (type == "MET_DOUBLE") return 8;
  fail("MHD: unsupported ElementType '" + type + "'");
}

MhdHeader parse_header(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "MHD: cannot open header " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (!trim(line).empty()) fail("MHD: malformed header line '" + line + "'");
      continue;
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  auto get = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    require(it != kv.end(), "MHD: missing key " + key);
    return it->second;
  };

  require(get("NDims") == "3", "MHD: NDims must be 3");
  if (kv.count("ElementByteOrderMSB"))
    require(kv["ElementByteOrderMSB"] == "False", "MHD: big-endian data unsupported");
  if (kv.count("BinaryDataByteOrderMSB"))
    require(kv["BinaryDataByteOrderMSB"] == "False", "MHD: big-endian data unsupported");

  MhdHeader h;
  {
    std::istringstream ds(get("DimSize"));
    if (!(ds >> h.dims.nx >> h.dims.ny >> h.dims.nz)) fail("MHD: malformed DimSize");
    require(h.dims.nx >= 1 && h.dims.ny >= 1 && h.dims.nz >= 1, "MHD: DimSize must be >= 1");
  }
  if (kv.count("ElementSpacing")) {
    std::istringstream ss(kv["ElementSpacing"]);
    if (!(ss >> h.spacing.sx >> h.spacing.sy >> h.spacing.sz)) fail("MHD: malformed ElementSpacing");
    require(h.spacing.sx > 0 && h.spacing.sy > 0 && h.spacing.sz > 0,
            "MHD: ElementSpacing must be > 0");
  }
  h.element_type = get("ElementType");
  element_size(h.element_type);  // validates
  h.data_file = get("ElementDataFile");
  require(h.data_file != "LIST", "MHD: multi-file data unsupported");
  return h;
}

std::vector<char> read_raw(const std::string& header_path, const MhdHeader& h) {
  fs::path raw = h.data_file == "LOCAL" ? fs::path(header_path)
                                        : fs::path(header_path).parent_path() / h.data_file;
  std::ifstream in(raw, std::ios::binary);
  require(in.good(), "MHD: cannot open data file " + raw.string());
  if (h.data_file == "LOCAL") fail("MHD: LOCAL data unsupported");
  in.seekg(0, std::ios::end);
  auto bytes = size_t(in.tellg());
  in.seekg(0);
  size_t expected = size_t(h.dims.count()) * element_size(h.element_type);
  require(bytes == expected, "MHD: data size mismatch: raw file holds " + std::to_string(bytes) +
                                 " bytes, header declares " + std::to_string(expected));
  std::vector<char> buf(bytes);
  in.read(buf.data(), std::streamsize(bytes));
  require(in.good(), "MHD: short read from " + raw.string());
  return buf;
}

template <typename S>
void widen(const std::vector<char>& raw, std::vector<double>& out) {
  const S* p = reinterpret_cast<const S*>(raw.data());
  size_t n = raw.size() / sizeof(S);
  out.resize(n);
  for (size_t i = 0; i < n; ++i) out[i] = double(p[i]);
}

template <typename S>
void narrow(const std::vector<double>& data, std::vector<char>& raw) {
  raw.resize(data.size() * sizeof(S));
  S* p = reinterpret_cast<S*>(raw.data());
  for (size_t i = 0; i < data.size(); ++i) {
    if constexpr (std::is_integral_v<S>)
      p[i] = S(std::llround(data[i]));
    else
      p[i] = S(data[i]);
  }
}

void write_pair(const std::string& path, Dims3 dims, Spacing3 sp, const std::string& type,
                const char* bytes, size_t count) {
  fs::path header(path);
  require(header.extension() == ".mhd", "MHD: expected a .mhd path, got " + path);
  fs::path raw = header;
  raw.replace_extension(".raw");
  {
    std::ofstream out(header);
    require(out.good(), "MHD: cannot write header " + path);
    out << "ObjectType = Image\n"
        << "NDims = 3\n"
        << "BinaryData = True\n"
        << "DimSize = " << dims.nx << " " << dims.ny << " " << dims.nz << "\n";
    char sbuf[96];
    std::snprintf(sbuf, sizeof sbuf, "ElementSpacing = %.17g %.17g %.17g\n", sp.sx, sp.sy, sp.sz);
    out << sbuf << "ElementType = " << type << "\n"
        << "ElementByteOrderMSB = False\n"
        << "ElementDataFile = " << raw.filename().string() << "\n";
  }
  std::ofstream out(raw, std::ios::binary);
  require(out.good(), "MHD: cannot write data file " + raw.string());
  out.write(bytes, std::streamsize(count));
  require(out.good(), "MHD: short write to " + raw.string());
}

}  // namespace

Volume load_volume(const std::string& path) {
  MhdHeader h = parse_header(path);
  std::vector<char> raw = read_raw(path, h);
  Volume v;
  v.dims = h.dims;
  v.spacing = h.spacing;
  if (h.element_type == "MET_UCHAR") widen<uint8_t>(raw, v.data);
  else if (h.element_type == "MET_SHORT") widen<int16_t>(raw, v.data);
  else if (h.element_type == "MET_USHORT") widen<uint16_t>(raw, v.data);
  else if (h.element_type == "MET_FLOAT") widen<float>(raw, v.data);
  else widen<double>(raw, v.data);
  validate_finite(v);
  return v;
}

void save_volume(const Volume& v, const std::string& path, const std::string& element_type) {
  std::vector<char> raw;
  if (element_type == "MET_UCHAR") narrow<uint8_t>(v.data, raw);
  else if (element_type == "MET_SHORT") narrow<int16_t>(v.data, raw);
  else if (element_type == "MET_USHORT") narrow<uint16_t>(v.data, raw);
  else if (element_type == "MET_FLOAT") narrow<float>(v.data, raw);
  else if (element_type == "MET_DOUBLE") narrow<double>(v.data, raw);
  else fail("MHD: unsupported ElementType '" + element_type + "'");
  write_pair(path, v.dims, v.spacing, element_type, raw.data(), raw.size());
}

LabelVolume load_label_volume(const std::string& path) {
  MhdHeader h = parse_header(path);
  require(h.element_type == "MET_UCHAR", "MHD: label volumes must be MET_UCHAR");
  std::vector<char> raw = read_raw(path, h);
  LabelVolume l;
  l.dims = h.dims;
  l.spacing = h.spacing;
  l.data.assign(reinterpret_cast<const uint8_t*>(raw.data()),
                reinterpret_cast<const uint8_t*>(raw.data()) + raw.size());
  validate_labels(l);
  return l;
}

void save_label_volume(const LabelVolume& l, const std::string& path) {
  validate_labels(l);
  write_pair(path, l.dims, l.spacing, "MET_UCHAR",
             reinterpret_cast<const char*>(l.data.data()), l.data.size());
}

}  // namespace lseg
