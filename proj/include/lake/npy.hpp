#pragma once

// NPY v1.0 reading and writing for the dtypes the engine exchanges:
// float32 features and maps, float64 profiles, uint8 masks, int64 channel
// indices.
// Payloads are little-endian and C-ordered. Headers are padded with spaces
// so that the payload starts on a 64-byte boundary.

#include "lake/types.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lake::npy {

enum class DType { Float32, Float64, UInt8, Int64 };

std::string_view descr(DType dtype) noexcept;
std::size_t item_size(DType dtype) noexcept;

struct Header {
    DType dtype = DType::Float32;
    std::vector<std::size_t> shape;
    std::size_t payload_offset = 0;  // bytes from file start to first element

    std::size_t element_count() const noexcept;
    std::size_t payload_bytes() const noexcept { return element_count() * item_size(dtype); }
};

/// Decoded array: header plus raw payload bytes (little-endian).
struct Array {
    Header header;
    std::vector<std::byte> payload;
};

/// Serialize to the canonical byte stream. Identical inputs give identical bytes.
std::string encode(DType dtype, std::span<const std::size_t> shape, std::span<const std::byte> payload);

/// Parse a full NPY byte stream. Throws FormatError with the failing byte offset.
Array decode(std::span<const std::byte> bytes);

/// Parse only the header of `path` and check the file length against it.
Header read_header(const std::filesystem::path& path);

Array read(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::string_view bytes);

// Typed helpers. Negative expectations mean "any".
RowMatrix<float> read_matrix(const std::filesystem::path& path, Index expected_rows = -1,
                             Index expected_cols = -1);
Vector<float> read_vector(const std::filesystem::path& path, Index expected_length = -1);
RowMatrix<std::uint8_t> read_mask(const std::filesystem::path& path, Index expected_rows = -1,
                                  Index expected_cols = -1);
std::vector<std::int64_t> read_indices(const std::filesystem::path& path);

void write_matrix(const std::filesystem::path& path, const RowMatrix<float>& matrix);
void write_vector(const std::filesystem::path& path, const Vector<float>& vector);
void write_vector(const std::filesystem::path& path, const Vector<double>& vector);  // stored as float64
Vector<double> read_vector_f64(const std::filesystem::path& path, Index expected_length = -1);
void write_mask(const std::filesystem::path& path, const RowMatrix<std::uint8_t>& mask);
void write_indices(const std::filesystem::path& path, std::span<const Index> indices);

/// Loads an N x D float32 tensor and checks it against the expected grid and width.
FeatureTensor read_feature_tensor(const std::filesystem::path& path, Grid grid, Index expected_dim,
                                  int layer_id);

}  // namespace lake::npy
