#pragma once

// Dense grids shared by every stage: images, flow fields and per-pixel masks.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gyroflow/error.hpp"

namespace gyroflow {

//! per-pixel boolean grid, row-major
template <typename Tag>
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool value = false)
        : width_(width), height_(height), bits_(checked_size(width, height), value ? 1 : 0) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return bits_.size(); }

    bool operator()(int x, int y) const { return bits_[index(x, y)] != 0; }
    void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
    bool operator[](std::size_t i) const { return bits_[i] != 0; }
    void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto b : bits_) n += b;
        return n;
    }

    bool operator==(const Mask&) const = default;

private:
    static std::size_t checked_size(int w, int h) {
        if (w <= 0 || h <= 0) throw InvalidArgument("mask dimensions must be positive");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    int width_ = 0, height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct OcclusionTag {};
struct ValidityTag {};

//! true = occluded (or out of bounds, for warp masks)
using OcclusionMask = Mask<OcclusionTag>;
//! true = pixel participates in evaluation
using ValidityMask = Mask<ValidityTag>;

//! Dense per-pixel displacement (u, v) in pixels, with a validity flag.
//! Gyro fields, estimated flows and fused flows all share this type.
class FlowField {
public:
    FlowField() = default;
    FlowField(int width, int height, double u = 0.0, double v = 0.0)
        : width_(width), height_(height), u_(checked_size(width, height), u), v_(u_.size(), v),
          valid_(u_.size(), 1) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return u_.size(); }

    double u(int x, int y) const { return u_[index(x, y)]; }
    double v(int x, int y) const { return v_[index(x, y)]; }
    double& u(int x, int y) { return u_[index(x, y)]; }
    double& v(int x, int y) { return v_[index(x, y)]; }
    bool valid(int x, int y) const { return valid_[index(x, y)] != 0; }
    void set_valid(int x, int y, bool b) { valid_[index(x, y)] = b ? 1 : 0; }

    void set(int x, int y, double uu, double vv) {
        const auto i = index(x, y);
        u_[i] = uu;
        v_[i] = vv;
    }

    // flat access, i = y * width + x
    const std::vector<double>& us() const noexcept { return u_; }
    const std::vector<double>& vs() const noexcept { return v_; }
    std::vector<double>& us() noexcept { return u_; }
    std::vector<double>& vs() noexcept { return v_; }
    bool valid(std::size_t i) const { return valid_[i] != 0; }
    void set_valid(std::size_t i, bool b) { valid_[i] = b ? 1 : 0; }

    bool same_shape(const FlowField& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

    bool operator==(const FlowField&) const = default;

private:
    static std::size_t checked_size(int w, int h) {
        if (w <= 0 || h <= 0) throw InvalidArgument("flow field dimensions must be positive");
        return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
    }
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }

    int width_ = 0, height_ = 0;
    std::vector<double> u_, v_;
    std::vector<std::uint8_t> valid_;
};

//! Planar image with samples in [0, 1]; channel-interleaved.
class ImageBuffer {
public:
    ImageBuffer() = default;
    ImageBuffer(int width, int height, int channels = 1, double value = 0.0)
        : width_(width), height_(height), channels_(channels) {
        if (width <= 0 || height <= 0) throw InvalidArgument("image dimensions must be positive");
        if (channels != 1 && channels != 3) throw InvalidArgument("image must have 1 or 3 channels");
        if (!(value >= 0.0 && value <= 1.0)) throw InvalidArgument("image sample outside [0, 1]");
        data_.assign(static_cast<std::size_t>(width) * height * channels, value);
    }

    //! takes ownership of `samples`; validates range and size
    ImageBuffer(int width, int height, int channels, std::vector<double> samples)
        : ImageBuffer(width, height, channels) {
        if (samples.size() != data_.size()) throw InvalidArgument("image sample count mismatch");
        for (double s : samples)
            if (!(s >= 0.0 && s <= 1.0)) throw InvalidArgument("image sample outside [0, 1] or non-finite");
        data_ = std::move(samples);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }

    double operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }
    double& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }

    //! edge-clamped access
    double clamped(int x, int y, int c = 0) const {
        x = x < 0 ? 0 : (x >= width_ ? width_ - 1 : x);
        y = y < 0 ? 0 : (y >= height_ ? height_ - 1 : y);
        return data_[index(x, y, c)];
    }

    const std::vector<double>& data() const noexcept { return data_; }
    std::vector<double>& data() noexcept { return data_; }

    bool same_shape(const ImageBuffer& o) const noexcept {
        return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
    }

    bool operator==(const ImageBuffer&) const = default;

private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }

    int width_ = 0, height_ = 0, channels_ = 1;
    std::vector<double> data_;
};

//! luma (Rec. 601) for 3-channel images, copy otherwise
inline ImageBuffer to_gray(const ImageBuffer& img) {
    if (img.channels() == 1) return img;
    ImageBuffer out(img.width(), img.height(), 1);
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            out(x, y) = 0.299 * img(x, y, 0) + 0.587 * img(x, y, 1) + 0.114 * img(x, y, 2);
    return out;
}

} // namespace gyroflow
