#include "lake/npy.hpp"

#include "lake/error.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <optional>

namespace lake::npy {

static_assert(std::endian::native == std::endian::little, "NPY payloads are handled as little-endian");

namespace {

constexpr unsigned char kMagic[] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kMagicSize = sizeof(kMagic);
constexpr std::size_t kAlignment = 64;

std::optional<DType> parse_descr(std::string_view text) {
    if (text == "<f4") return DType::Float32;
    if (text == "<f8") return DType::Float64;
    if (text == "|u1" || text == "<u1") return DType::UInt8;
    if (text == "<i8") return DType::Int64;
    return std::nullopt;
}

std::string shape_literal(std::span<const std::size_t> shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ", ";
        out += std::to_string(shape[i]);
    }
    if (shape.size() == 1) out += ",";
    out += ")";
    return out;
}

// Minimal parser for the python dict literal NPY writers emit.
class HeaderParser {
public:
    HeaderParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

    Header parse() {
        std::optional<DType> dtype;
        std::optional<bool> fortran;
        std::optional<std::vector<std::size_t>> shape;

        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                break;
            }
            const std::string key = quoted();
            skip_ws();
            expect(':');
            skip_ws();
            if (key == "descr") {
                const std::size_t at = pos_;
                const std::string value = quoted();
                dtype = parse_descr(value);
                if (!dtype) fail("unsupported dtype '" + value + "'", at);
            } else if (key == "fortran_order") {
                fortran = boolean();
            } else if (key == "shape") {
                shape = tuple();
            } else {
                fail("unexpected header key '" + key + "'", pos_);
            }
            skip_ws();
            if (peek() == ',') ++pos_;
        }
        skip_ws();
        if (pos_ != text_.size()) fail("trailing bytes after header dict", pos_);
        if (!dtype || !fortran || !shape) fail("header dict is missing descr, fortran_order or shape", 0);
        if (*fortran) fail("fortran_order arrays are not supported", 0);
        if (shape->empty()) fail("zero-dimensional arrays are not supported", 0);

        Header header;
        header.dtype = *dtype;
        header.shape = std::move(*shape);
        return header;
    }

private:
    [[noreturn]] void fail(const std::string& what, std::size_t at) const {
        throw FormatError("NPY header: " + what, base_ + at);
    }
    char peek() const {
        if (pos_ >= text_.size()) fail("unexpected end of header", pos_);
        return text_[pos_];
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'", pos_);
        ++pos_;
    }
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    std::string quoted() {
        const char q = peek();
        if (q != '\'' && q != '"') fail("expected quoted string", pos_);
        const std::size_t end = text_.find(q, pos_ + 1);
        if (end == std::string_view::npos) fail("unterminated string", pos_);
        std::string out(text_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
        return out;
    }
    bool boolean() {
        if (text_.substr(pos_, 4) == "True") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "False") {
            pos_ += 5;
            return false;
        }
        fail("expected True or False", pos_);
    }
    std::vector<std::size_t> tuple() {
        std::vector<std::size_t> dims;
        expect('(');
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                return dims;
            }
            std::size_t value = 0;
            const char* first = text_.data() + pos_;
            const char* last = text_.data() + text_.size();
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc{} || ptr == first) fail("expected shape integer", pos_);
            pos_ += static_cast<std::size_t>(ptr - first);
            dims.push_back(value);
            skip_ws();
            if (peek() == ',') ++pos_;
        }
    }

    std::string_view text_;
    std::size_t base_;
    std::size_t pos_ = 0;
};

// Reads magic, version and header; returns parsed header with payload_offset set.
Header decode_header(std::span<const std::byte> bytes) {
    if (bytes.size() < kMagicSize + 2) throw FormatError("file too short for NPY magic", bytes.size());
    for (std::size_t i = 0; i < kMagicSize; ++i) {
        if (static_cast<unsigned char>(bytes[i]) != kMagic[i]) throw FormatError("bad NPY magic", i);
    }
    const auto major = static_cast<unsigned>(bytes[kMagicSize]);
    const auto minor = static_cast<unsigned>(bytes[kMagicSize + 1]);
    std::size_t length_bytes = 0;
    if (major == 1 && minor == 0) {
        length_bytes = 2;
    } else if ((major == 2 || major == 3) && minor == 0) {
        length_bytes = 4;
    } else {
        throw FormatError("unsupported NPY version " + std::to_string(major) + "." + std::to_string(minor),
                          kMagicSize);
    }
    const std::size_t prefix = kMagicSize + 2 + length_bytes;
    if (bytes.size() < prefix) throw FormatError("file too short for NPY header length", bytes.size());
    std::size_t header_len = 0;
    for (std::size_t i = 0; i < length_bytes; ++i) {
        header_len |= static_cast<std::size_t>(bytes[kMagicSize + 2 + i]) << (8 * i);
    }
    if (bytes.size() < prefix + header_len) throw FormatError("header length exceeds file size", prefix);
    std::string_view text(reinterpret_cast<const char*>(bytes.data() + prefix), header_len);
    if (text.empty() || text.back() != '\n') throw FormatError("header is not newline-terminated", prefix + header_len);

    Header header = HeaderParser(text, prefix).parse();
    header.payload_offset = prefix + header_len;
    return header;
}

std::vector<std::byte> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<std::byte> bytes(size);
    in.seekg(0);
    if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size))) {
        throw IoError("cannot read " + path.string());
    }
    return bytes;
}

void check_expected(const Header& header, DType dtype, std::size_t ndim, const std::filesystem::path& path) {
    if (header.dtype != dtype) {
        throw ShapeError(path.string() + ": dtype " + std::string(descr(header.dtype)) + ", expected " +
                         std::string(descr(dtype)));
    }
    if (header.shape.size() != ndim) {
        throw ShapeError(path.string() + ": array has " + std::to_string(header.shape.size()) +
                         " dimensions, expected " + std::to_string(ndim));
    }
}

void check_dim(std::size_t actual, Index expected, const char* what, const std::filesystem::path& path) {
    if (expected >= 0 && actual != static_cast<std::size_t>(expected)) {
        throw ShapeError(path.string() + ": " + what + " is " + std::to_string(actual) + ", expected " +
                         std::to_string(expected));
    }
}

template <typename T>
void write_typed(const std::filesystem::path& path, DType dtype, std::span<const std::size_t> shape, const T* data,
                 std::size_t count) {
    const std::span<const std::byte> payload(reinterpret_cast<const std::byte*>(data), count * sizeof(T));
    write_bytes(path, encode(dtype, shape, payload));
}

}  // namespace

std::string_view descr(DType dtype) noexcept {
    switch (dtype) {
        case DType::Float32: return "<f4";
        case DType::Float64: return "<f8";
        case DType::UInt8: return "|u1";
        case DType::Int64: return "<i8";
    }
    return "?";
}

std::size_t item_size(DType dtype) noexcept {
    switch (dtype) {
        case DType::Float32: return 4;
        case DType::Float64: return 8;
        case DType::UInt8: return 1;
        case DType::Int64: return 8;
    }
    return 0;
}

std::size_t Header::element_count() const noexcept {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string encode(DType dtype, std::span<const std::size_t> shape, std::span<const std::byte> payload) {
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    if (payload.size() != count * item_size(dtype)) {
        throw ShapeError("payload of " + std::to_string(payload.size()) + " bytes does not match shape " +
                         shape_literal(shape));
    }
    std::string dict = "{'descr': '" + std::string(descr(dtype)) + "', 'fortran_order': False, 'shape': " +
                       shape_literal(shape) + ", }";
    const std::size_t prefix = kMagicSize + 2 + 2;
    const std::size_t unpadded = prefix + dict.size() + 1;
    const std::size_t padding = (kAlignment - unpadded % kAlignment) % kAlignment;
    dict.append(padding, ' ');
    dict.push_back('\n');
    if (dict.size() > 0xFFFF) throw ShapeError("NPY v1.0 header too long for shape " + shape_literal(shape));

    std::string out;
    out.reserve(prefix + dict.size() + payload.size());
    out.append(reinterpret_cast<const char*>(kMagic), kMagicSize);
    out.push_back(char{1});
    out.push_back(char{0});
    out.push_back(static_cast<char>(dict.size() & 0xFF));
    out.push_back(static_cast<char>((dict.size() >> 8) & 0xFF));
    out += dict;
    out.append(reinterpret_cast<const char*>(payload.data()), payload.size());
    return out;
}

Array decode(std::span<const std::byte> bytes) {
    Array array;
    array.header = decode_header(bytes);
    const std::size_t expected = array.header.payload_bytes();
    const std::size_t available = bytes.size() - array.header.payload_offset;
    if (available != expected) {
        throw ShapeError("header declares shape " + shape_literal(array.header.shape) + " (" +
                         std::to_string(expected) + " payload bytes) but file carries " + std::to_string(available));
    }
    array.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(array.header.payload_offset), bytes.end());
    return array;
}

Header read_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const auto file_size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    // v1 headers are bounded by 10 + 65535 bytes; v2/3 headers this large do not occur in practice.
    std::vector<std::byte> head(std::min<std::size_t>(file_size, 10 + 0xFFFF));
    in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
    try {
        Header header = decode_header(head);
        if (file_size - header.payload_offset != header.payload_bytes()) {
            throw ShapeError("header declares shape " + shape_literal(header.shape) + " (" +
                             std::to_string(header.payload_bytes()) + " payload bytes) but file carries " +
                             std::to_string(file_size - header.payload_offset));
        }
        return header;
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset());
    } catch (const ShapeError& e) {
        throw ShapeError(path.string() + ": " + e.what());
    }
}

Array read(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    try {
        return decode(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset());
    } catch (const ShapeError& e) {
        throw ShapeError(path.string() + ": " + e.what());
    }
}

void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

RowMatrix<float> read_matrix(const std::filesystem::path& path, Index expected_rows, Index expected_cols) {
    Array array = read(path);
    check_expected(array.header, DType::Float32, 2, path);
    check_dim(array.header.shape[0], expected_rows, "row count", path);
    check_dim(array.header.shape[1], expected_cols, "column count", path);
    RowMatrix<float> out(static_cast<Index>(array.header.shape[0]), static_cast<Index>(array.header.shape[1]));
    std::memcpy(out.data(), array.payload.data(), array.payload.size());
    return out;
}

Vector<float> read_vector(const std::filesystem::path& path, Index expected_length) {
    Array array = read(path);
    check_expected(array.header, DType::Float32, 1, path);
    check_dim(array.header.shape[0], expected_length, "length", path);
    Vector<float> out(static_cast<Index>(array.header.shape[0]));
    std::memcpy(out.data(), array.payload.data(), array.payload.size());
    return out;
}

RowMatrix<std::uint8_t> read_mask(const std::filesystem::path& path, Index expected_rows, Index expected_cols) {
    Array array = read(path);
    check_expected(array.header, DType::UInt8, 2, path);
    check_dim(array.header.shape[0], expected_rows, "mask height", path);
    check_dim(array.header.shape[1], expected_cols, "mask width", path);
    RowMatrix<std::uint8_t> out(static_cast<Index>(array.header.shape[0]),
                                static_cast<Index>(array.header.shape[1]));
    std::memcpy(out.data(), array.payload.data(), array.payload.size());
    if ((out.array() > std::uint8_t{1}).any()) throw ShapeError(path.string() + ": mask values must be 0 or 1");
    return out;
}

std::vector<std::int64_t> read_indices(const std::filesystem::path& path) {
    Array array = read(path);
    check_expected(array.header, DType::Int64, 1, path);
    std::vector<std::int64_t> out(array.header.shape[0]);
    std::memcpy(out.data(), array.payload.data(), array.payload.size());
    return out;
}

void write_matrix(const std::filesystem::path& path, const RowMatrix<float>& matrix) {
    if (!matrix.allFinite()) throw ParameterError("refusing to write non-finite values to " + path.string());
    const std::size_t shape[] = {static_cast<std::size_t>(matrix.rows()), static_cast<std::size_t>(matrix.cols())};
    write_typed(path, DType::Float32, shape, matrix.data(), static_cast<std::size_t>(matrix.size()));
}

void write_vector(const std::filesystem::path& path, const Vector<float>& vector) {
    if (!vector.allFinite()) throw ParameterError("refusing to write non-finite values to " + path.string());
    const std::size_t shape[] = {static_cast<std::size_t>(vector.size())};
    write_typed(path, DType::Float32, shape, vector.data(), static_cast<std::size_t>(vector.size()));
}

void write_vector(const std::filesystem::path& path, const Vector<double>& vector) {
    if (!vector.allFinite()) throw ParameterError("refusing to write non-finite values to " + path.string());
    const std::size_t shape[] = {static_cast<std::size_t>(vector.size())};
    write_typed(path, DType::Float64, shape, vector.data(), static_cast<std::size_t>(vector.size()));
}

Vector<double> read_vector_f64(const std::filesystem::path& path, Index expected_length) {
    Array array = read(path);
    check_expected(array.header, DType::Float64, 1, path);
    check_dim(array.header.shape[0], expected_length, "length", path);
    Vector<double> out(static_cast<Index>(array.header.shape[0]));
    std::memcpy(out.data(), array.payload.data(), array.payload.size());
    return out;
}

void write_mask(const std::filesystem::path& path, const RowMatrix<std::uint8_t>& mask) {
    const std::size_t shape[] = {static_cast<std::size_t>(mask.rows()), static_cast<std::size_t>(mask.cols())};
    write_typed(path, DType::UInt8, shape, mask.data(), static_cast<std::size_t>(mask.size()));
}

void write_indices(const std::filesystem::path& path, std::span<const Index> indices) {
    std::vector<std::int64_t> values(indices.begin(), indices.end());
    const std::size_t shape[] = {values.size()};
    write_typed(path, DType::Int64, shape, values.data(), values.size());
}

FeatureTensor read_feature_tensor(const std::filesystem::path& path, Grid grid, Index expected_dim, int layer_id) {
    FeatureTensor tensor;
    tensor.tokens = read_matrix(path, grid.size(), expected_dim);
    if (!tensor.tokens.allFinite()) throw ValidationError(path.string() + ": tensor contains NaN or Inf");
    tensor.grid = grid;
    tensor.layer_id = layer_id;
    return tensor;
}

}  // namespace lake::npy
