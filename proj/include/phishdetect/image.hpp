// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0
//
// Page screenshots as dense float images. Binary PPM (P6, maxval 255) is
// the one raster format the pipeline reads and writes.

#pragma once

#include <filesystem>

#include "phishdetect/tensor.hpp"

namespace phishdetect {

// CHW float image, 3 channels, values clamped to [0,1].
struct ImageTensor {
    int height = 0;
    int width = 0;
    std::vector<double> data;  // 3 * height * width, channel-major

    static ImageTensor filled(int height, int width, double r, double g, double b);

    double& at(int channel, int y, int x);
    double at(int channel, int y, int x) const;
    void clamp();

    // {3,H,W} tensor view (copy) for the conv stacks.
    Tensor to_tensor() const;
};

ImageTensor read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const ImageTensor& image);

// Bilinear resample to the requested size; no aspect-ratio padding.
ImageTensor bilinear_resize(const ImageTensor& image, int out_height, int out_width);

}  // namespace phishdetect
