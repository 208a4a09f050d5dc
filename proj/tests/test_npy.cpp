#include "lake/error.hpp"
#include "lake/npy.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace lake;
using lake::testing::scratch_dir;
using lake::testing::slurp;

namespace {

std::span<const std::byte> as_bytes(const std::string& s) {
    return {reinterpret_cast<const std::byte*>(s.data()), s.size()};
}

}  // namespace

TEST(Npy, SingleZeroRoundTrips) {
    const auto dir = scratch_dir("npy_zero");
    RowMatrix<float> m = RowMatrix<float>::Zero(1, 1);
    npy::write_matrix(dir / "z.npy", m);
    const auto back = npy::read_matrix(dir / "z.npy");
    ASSERT_EQ(back.rows(), 1);
    ASSERT_EQ(back.cols(), 1);
    EXPECT_EQ(back(0, 0), 0.0f);
}

TEST(Npy, RandomMatrixIsBitExact) {
    const auto dir = scratch_dir("npy_rt");
    SeededRng rng(7);
    const auto m = lake::testing::random_matrix(rng, 4, 8);
    npy::write_matrix(dir / "a.npy", m);
    const auto back = npy::read_matrix(dir / "a.npy", 4, 8);
    EXPECT_EQ(std::memcmp(back.data(), m.data(), sizeof(float) * 32), 0);
}

TEST(Npy, HeaderLayout) {
    const std::string bytes = npy::encode(npy::DType::Float32, std::vector<std::size_t>{3, 4},
                                          std::vector<std::byte>(48));
    ASSERT_GE(bytes.size(), 10u);
    EXPECT_EQ(bytes.substr(0, 6), "\x93NUMPY");
    EXPECT_EQ(bytes[6], '\x01');
    EXPECT_EQ(bytes[7], '\x00');
    const std::size_t header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    EXPECT_EQ((10 + header_len) % 64, 0u);
    const std::string dict = bytes.substr(10, header_len);
    EXPECT_EQ(dict.back(), '\n');
    EXPECT_NE(dict.find("'descr': '<f4'"), std::string::npos);
    EXPECT_NE(dict.find("'fortran_order': False"), std::string::npos);
    EXPECT_NE(dict.find("'shape': (3, 4)"), std::string::npos);
    EXPECT_EQ(bytes.size(), 10 + header_len + 48);
}

TEST(Npy, OneElementShapeUsesTrailingComma) {
    const std::string bytes = npy::encode(npy::DType::Float32, std::vector<std::size_t>{5}, std::vector<std::byte>(20));
    EXPECT_NE(bytes.find("'shape': (5,)"), std::string::npos);
}

TEST(Npy, ShapePayloadMismatchIsShapeError) {
    // Header says 3x4 (48 bytes) but only 10 floats follow.
    const std::string good = npy::encode(npy::DType::Float32, std::vector<std::size_t>{3, 4}, std::vector<std::byte>(48));
    const std::string truncated = good.substr(0, good.size() - 8);
    EXPECT_THROW(npy::decode(as_bytes(truncated)), ShapeError);

    const auto dir = scratch_dir("npy_short");
    npy::write_bytes(dir / "short.npy", truncated);
    EXPECT_THROW(npy::read_matrix(dir / "short.npy"), ShapeError);
    EXPECT_THROW(npy::read_header(dir / "short.npy"), ShapeError);
}

TEST(Npy, SingleOneEncodesLittleEndianPayload) {
    const auto dir = scratch_dir("npy_one");
    RowMatrix<float> m(1, 1);
    m(0, 0) = 1.0f;
    npy::write_matrix(dir / "one.npy", m);
    const std::string bytes = slurp(dir / "one.npy");
    const auto header = npy::read_header(dir / "one.npy");
    ASSERT_EQ(bytes.size(), header.payload_offset + 4);
    EXPECT_EQ(bytes.substr(header.payload_offset), std::string("\x00\x00\x80\x3f", 4));
}

TEST(Npy, WritesAreDeterministic) {
    const auto dir = scratch_dir("npy_det");
    SeededRng rng(3);
    const auto m = lake::testing::random_matrix(rng, 17, 5);
    npy::write_matrix(dir / "a.npy", m);
    npy::write_matrix(dir / "b.npy", m);
    EXPECT_EQ(slurp(dir / "a.npy"), slurp(dir / "b.npy"));
}

TEST(Npy, TokenTensorPayloadSize) {
    const auto dir = scratch_dir("npy_big");
    const RowMatrix<float> m = RowMatrix<float>::Constant(576, 1024, 0.5f);
    npy::write_matrix(dir / "t.npy", m);
    const auto header = npy::read_header(dir / "t.npy");
    EXPECT_EQ(header.payload_bytes(), 2'359'296u);
    EXPECT_EQ(std::filesystem::file_size(dir / "t.npy") - header.payload_offset, 2'359'296u);
    EXPECT_EQ(header.payload_offset % 64, 0u);
}

TEST(Npy, BadMagicReportsOffset) {
    std::string bytes = npy::encode(npy::DType::Float32, std::vector<std::size_t>{1}, std::vector<std::byte>(4));
    bytes[3] = 'X';
    try {
        npy::decode(as_bytes(bytes));
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.offset(), 3u);
    }
}

TEST(Npy, UnterminatedHeaderIsFormatError) {
    std::string bytes = npy::encode(npy::DType::Float32, std::vector<std::size_t>{1}, std::vector<std::byte>(4));
    const std::size_t header_len = static_cast<unsigned char>(bytes[8]) | (static_cast<unsigned char>(bytes[9]) << 8);
    bytes[10 + header_len - 1] = ' ';
    EXPECT_THROW(npy::decode(as_bytes(bytes)), FormatError);
}

TEST(Npy, GarbledDictIsFormatError) {
    std::string bytes = npy::encode(npy::DType::Float32, std::vector<std::size_t>{1}, std::vector<std::byte>(4));
    const auto at = bytes.find("descr");
    bytes.replace(at, 5, "dxscr");
    EXPECT_THROW(npy::decode(as_bytes(bytes)), FormatError);
}

TEST(Npy, TypedReadersCheckExpectations) {
    const auto dir = scratch_dir("npy_expect");
    const RowMatrix<float> m = RowMatrix<float>::Zero(3, 4);
    npy::write_matrix(dir / "m.npy", m);
    EXPECT_THROW(npy::read_matrix(dir / "m.npy", 4, 4), ShapeError);
    EXPECT_THROW(npy::read_matrix(dir / "m.npy", 3, 5), ShapeError);
    EXPECT_THROW(npy::read_vector(dir / "m.npy"), ShapeError);
    EXPECT_THROW(npy::read_mask(dir / "m.npy"), ShapeError);
    EXPECT_THROW(npy::read_feature_tensor(dir / "m.npy", Grid{2, 2}, 4, 12), ShapeError);
    EXPECT_NO_THROW(npy::read_feature_tensor(dir / "m.npy", Grid{1, 3}, 4, 12));
}

TEST(Npy, OtherDtypesRoundTrip) {
    const auto dir = scratch_dir("npy_dtypes");
    Vector<double> v(3);
    v << 1.0 / 3.0, -2.5, 1e300;
    npy::write_vector(dir / "v.npy", v);
    EXPECT_EQ(npy::read_header(dir / "v.npy").dtype, npy::DType::Float64);
    EXPECT_EQ(npy::read_vector_f64(dir / "v.npy"), v);

    RowMatrix<std::uint8_t> mask(2, 3);
    mask << 0, 1, 1, 0, 0, 1;
    npy::write_mask(dir / "m.npy", mask);
    EXPECT_EQ(npy::read_mask(dir / "m.npy", 2, 3), mask);

    const std::vector<Index> idx{0, 5, 1023};
    npy::write_indices(dir / "i.npy", idx);
    EXPECT_EQ(npy::read_indices(dir / "i.npy"), (std::vector<std::int64_t>{0, 5, 1023}));
}

TEST(Npy, MaskValuesAboveOneRejected) {
    const auto dir = scratch_dir("npy_mask2");
    RowMatrix<std::uint8_t> mask = RowMatrix<std::uint8_t>::Zero(2, 2);
    mask(1, 1) = 2;
    npy::write_mask(dir / "m.npy", mask);
    EXPECT_THROW(npy::read_mask(dir / "m.npy"), ShapeError);
}

TEST(Npy, NonFiniteRejected) {
    const auto dir = scratch_dir("npy_nan");
    RowMatrix<float> m = RowMatrix<float>::Zero(2, 2);
    m(0, 1) = std::numeric_limits<float>::quiet_NaN();
    EXPECT_THROW(npy::write_matrix(dir / "m.npy", m), ParameterError);
}

TEST(Npy, RandomShapesRoundTrip) {
    SeededRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto rows = static_cast<Index>(1 + rng.below(40));
        const auto cols = static_cast<Index>(1 + rng.below(40));
        const auto m = lake::testing::random_matrix(rng, rows, cols, 1e3);
        const std::string bytes = npy::encode(npy::DType::Float32,
                                              std::vector<std::size_t>{std::size_t(rows), std::size_t(cols)},
                                              {reinterpret_cast<const std::byte*>(m.data()), std::size_t(m.size()) * 4});
        const auto arr = npy::decode(as_bytes(bytes));
        ASSERT_EQ(arr.header.shape, (std::vector<std::size_t>{std::size_t(rows), std::size_t(cols)}));
        ASSERT_EQ(std::memcmp(arr.payload.data(), m.data(), arr.payload.size()), 0);
    }
}
