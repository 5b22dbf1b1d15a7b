#include "sgt/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sgt/errors.hpp"
#include "json.hpp"

namespace sgt::num {

namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor stream writer assumes a little-endian host");

void write_raw(std::ostream& os, const Tensor& t) {
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
}

}  // namespace

void write_tensors(std::ostream& os, const std::vector<NamedTensor>& tensors) {
  for (const auto& nt : tensors) {
    nlohmann::json header;
    header["name"] = nt.name;
    header["shape"] = nt.tensor.shape();
    header["dtype"] = "f64";
    os << header.dump() << "\n";
  }
  os << "\n";
  for (const auto& nt : tensors) write_raw(os, nt.tensor);
  if (!os) throw DataError("tensor stream write failed");
}

std::vector<NamedTensor> read_tensors(std::istream& is) {
  std::vector<NamedTensor> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) break;
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.contains("name") || !header.contains("shape")) {
      throw DataError("malformed tensor header: " + line);
    }
    if (header.value("dtype", "") != "f64") {
      throw DataError("unsupported tensor dtype in header: " + line);
    }
    NamedTensor nt;
    nt.name = header["name"].get<std::string>();
    nt.tensor = Tensor(header["shape"].get<std::vector<std::size_t>>());
    out.push_back(std::move(nt));
  }
  for (auto& nt : out) {
    is.read(reinterpret_cast<char*>(nt.tensor.data()),
            static_cast<std::streamsize>(nt.tensor.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(nt.tensor.size() * sizeof(double))) {
      throw DataError("tensor stream truncated while reading '" + nt.name + "'");
    }
  }
  return out;
}

void write_tensors_file(const std::filesystem::path& path,
                        const std::vector<NamedTensor>& tensors) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot open '" + tmp.string() + "' for writing");
    write_tensors(os, tensors);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<NamedTensor> read_tensors_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open tensor file '" + path.string() + "'");
  return read_tensors(is);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot open '" + tmp.string() + "' for writing");
    os << content;
    if (!os) throw DataError("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sgt::num
