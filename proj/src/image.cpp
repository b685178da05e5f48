// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>

namespace phishdetect {

ImageTensor ImageTensor::filled(int height, int width, double r, double g, double b) {
    if (height <= 0 || width <= 0) {
        throw DataError("image dimensions must be positive");
    }
    ImageTensor img;
    img.height = height;
    img.width = width;
    img.data.resize(static_cast<std::size_t>(3) * height * width);
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    std::fill_n(img.data.begin(), plane, r);
    std::fill_n(img.data.begin() + plane, plane, g);
    std::fill_n(img.data.begin() + 2 * plane, plane, b);
    return img;
}

double& ImageTensor::at(int channel, int y, int x) {
    return data[(static_cast<std::size_t>(channel) * height + y) * width + x];
}

double ImageTensor::at(int channel, int y, int x) const {
    return data[(static_cast<std::size_t>(channel) * height + y) * width + x];
}

void ImageTensor::clamp() {
    for (auto& v : data) {
        v = std::clamp(v, 0.0, 1.0);
    }
}

Tensor ImageTensor::to_tensor() const {
    return Tensor::from_data({3, height, width}, data);
}

ImageTensor read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open image file: " + path.string());
    }
    std::string magic;
    in >> magic;
    if (magic != "P6") {
        throw DataError("unsupported image format in " + path.string() + " (expected binary PPM)");
    }
    auto next_token = [&in, &path]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw DataError("truncated PPM header in " + path.string());
    };
    const int width = std::stoi(next_token());
    const int height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (width <= 0 || height <= 0 || maxval != 255) {
        throw DataError("unsupported PPM geometry in " + path.string());
    }
    in.get();  // single whitespace after maxval

    std::vector<unsigned char> raw(static_cast<std::size_t>(3) * width * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw DataError("truncated PPM payload in " + path.string());
    }

    ImageTensor img;
    img.height = height;
    img.width = width;
    img.data.resize(raw.size());
    const std::size_t plane = static_cast<std::size_t>(height) * width;
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < 3; ++c) {
            img.data[static_cast<std::size_t>(c) * plane + p] =
                static_cast<double>(raw[p * 3 + static_cast<std::size_t>(c)]) / 255.0;
        }
    }
    return img;
}

void write_ppm(const std::filesystem::path& path, const ImageTensor& image) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write image file: " + path.string());
    }
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    const std::size_t plane = static_cast<std::size_t>(image.height) * image.width;
    std::vector<unsigned char> raw(plane * 3);
    for (std::size_t p = 0; p < plane; ++p) {
        for (int c = 0; c < 3; ++c) {
            const double v = std::clamp(image.data[static_cast<std::size_t>(c) * plane + p],
                                        0.0, 1.0);
            raw[p * 3 + static_cast<std::size_t>(c)] =
                static_cast<unsigned char>(std::lround(v * 255.0));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) {
        throw IoError("failed writing image file: " + path.string());
    }
}

ImageTensor bilinear_resize(const ImageTensor& image, int out_height, int out_width) {
    if (out_height <= 0 || out_width <= 0) {
        throw DataError("resize dimensions must be positive");
    }
    if (out_height == image.height && out_width == image.width) {
        return image;
    }
    ImageTensor out;
    out.height = out_height;
    out.width = out_width;
    out.data.resize(static_cast<std::size_t>(3) * out_height * out_width);

    const double sy = static_cast<double>(image.height) / out_height;
    const double sx = static_cast<double>(image.width) / out_width;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < out_height; ++y) {
            // Sample at pixel centers.
            const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, image.height - 1);
            const double wy = fy - y0;
            for (int x = 0; x < out_width; ++x) {
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, image.width - 1);
                const double wx = fx - x0;
                const double top = image.at(c, y0, x0) * (1.0 - wx) + image.at(c, y0, x1) * wx;
                const double bot = image.at(c, y1, x0) * (1.0 - wx) + image.at(c, y1, x1) * wx;
                out.at(c, y, x) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

}  // namespace phishdetect
