// Copyright (c) 2026 the phishdetect authors
// SPDX-License-Identifier: Apache-2.0

#include "phishdetect/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace phishdetect {

namespace {

const std::vector<std::string> kCloudSuffixes = {
    "weebly.com",  "typeform.com", "glitch.me", "webflow.io",
    "blogspot.com", "azurewebsites.net",
};

const std::vector<std::string> kWords = {
    "alpine",  "amber",   "anchor",  "apple",   "arbor",   "aspen",   "autumn",  "bakery",
    "banner",  "basket",  "beacon",  "bedrock", "bicycle", "blossom", "border",  "breeze",
    "bright",  "brook",   "butter",  "candle",  "canvas",  "carbon",  "castle",  "cedar",
    "cherry",  "circle",  "clover",  "coast",   "coffee",  "copper",  "coral",   "cotton",
    "cradle",  "crystal", "dawn",    "delta",   "desert",  "drift",   "eagle",   "echo",
    "ember",   "falcon",  "feather", "fern",    "field",   "flora",   "forest",  "fountain",
    "garden",  "garnet",  "ginger",  "glade",   "globe",   "golden",  "granite", "grove",
    "harbor",  "harvest", "hazel",   "heron",   "hidden",  "hollow",  "honey",   "horizon",
    "island",  "ivory",   "jasper",  "juniper", "kettle",  "lagoon",  "lantern", "laurel",
    "lavender","legend",  "linen",   "lotus",   "lunar",   "maple",   "marble",  "meadow",
    "mellow",  "mercury", "mirror",  "morning", "mosaic",  "mountain","nectar",  "noble",
    "ocean",   "olive",   "orchard", "oxide",   "pebble",  "pepper",  "pine",    "pioneer",
    "planet",  "pollen",  "prairie", "quartz",  "quiet",   "raven",   "river",   "rosewood",
    "saffron", "sage",    "salmon",  "sandy",   "sapphire","season",  "shadow",  "silver",
    "slate",   "solar",   "sparrow", "spring",  "stellar", "stone",   "summer",  "sunset",
    "swan",    "thistle", "timber",  "tulip",   "valley",  "velvet",  "violet",  "walnut",
    "willow",  "winter",  "wonder",  "zephyr",
};

const char kConsonants[] = "bcdfghjklmnpqrstvwxz";
const char kAlnum[] = "abcdefghijklmnopqrstuvwxyz0123456789";

const std::vector<std::string> kBrandNames = {
    "acmebank", "bluebird", "copperpay", "driftmail",
    "emberly",  "foxglove", "glacierco", "harborpost",
};

std::string pick(std::span<const std::string> pool, Rng& rng) {
    return pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
}

std::string random_alnum(Rng& rng, int min_len, int max_len) {
    const int len = min_len + rng.uniform_int(max_len - min_len + 1);
    std::string out;
    for (int i = 0; i < len; ++i) {
        out += kAlnum[static_cast<std::size_t>(rng.uniform_int(sizeof(kAlnum) - 1))];
    }
    return out;
}

}  // namespace

std::span<const std::string> synth_cloud_suffixes() {
    return kCloudSuffixes;
}

std::span<const std::string> synth_words() {
    return kWords;
}

std::string synth_random_subdomain(Rng& rng) {
    const int len = 8 + rng.uniform_int(7);  // 8..14
    std::string out;
    for (int i = 0; i < len; ++i) {
        if (rng.uniform() < 0.2) {
            out += static_cast<char>('0' + rng.uniform_int(10));
        } else {
            out += kConsonants[static_cast<std::size_t>(
                rng.uniform_int(sizeof(kConsonants) - 1))];
        }
    }
    return out;
}

std::vector<UrlSample> synth_urls(int n_per_class, std::uint64_t seed) {
    if (n_per_class < 1) {
        throw DataError("synth_urls: n_per_class must be >= 1");
    }
    Rng rng(seed);
    std::vector<UrlSample> out;
    out.reserve(static_cast<std::size_t>(n_per_class) * 2);

    const std::vector<std::string> tlds = {"com", "org", "net", "io"};
    for (int i = 0; i < n_per_class; ++i) {
        // Legitimate: dictionary-word hosts, half of them on the same cloud
        // suffixes the phishing class uses.
        std::string url = "https://";
        if (rng.uniform() < 0.5) {
            url += pick(kWords, rng);
            if (rng.uniform() < 0.5) {
                url += pick(kWords, rng);
            }
            url += "." + pick(kCloudSuffixes, rng);
        } else {
            url += pick(kWords, rng) + pick(kWords, rng) + "." +
                   tlds[static_cast<std::size_t>(rng.uniform_int(4))];
        }
        const int path_words = rng.uniform_int(3);
        for (int p = 0; p < path_words; ++p) {
            url += "/" + pick(kWords, rng);
        }
        out.push_back({url, Label::legitimate, "synth"});
    }
    for (int i = 0; i < n_per_class; ++i) {
        std::string url = "https://" + synth_random_subdomain(rng) + "." +
                          pick(kCloudSuffixes, rng);
        const int path_segments = rng.uniform_int(2);
        for (int p = 0; p < path_segments; ++p) {
            url += "/" + random_alnum(rng, 4, 10);
        }
        out.push_back({url, Label::phishing, "synth"});
    }
    return out;
}

std::vector<std::string> synth_brand_names(int count) {
    if (count < 1 || count > static_cast<int>(kBrandNames.size())) {
        throw DataError("synth_brand_names: count must lie in [1," +
                        std::to_string(kBrandNames.size()) + "]");
    }
    return {kBrandNames.begin(), kBrandNames.begin() + count};
}

namespace {

struct Palette {
    std::array<double, 3> background;
    std::array<double, 3> header;
    std::array<double, 3> accent;
    std::array<double, 3> logo;
};

// One well-separated palette per brand slot.
const std::array<Palette, 8> kPalettes = {{
    {{0.95, 0.95, 0.92}, {0.85, 0.15, 0.10}, {0.95, 0.60, 0.10}, {0.60, 0.05, 0.05}},
    {{0.90, 0.95, 1.00}, {0.10, 0.35, 0.80}, {0.20, 0.65, 0.95}, {0.05, 0.15, 0.55}},
    {{0.93, 1.00, 0.93}, {0.10, 0.60, 0.25}, {0.45, 0.80, 0.30}, {0.02, 0.35, 0.12}},
    {{1.00, 0.96, 0.88}, {0.75, 0.55, 0.05}, {0.95, 0.80, 0.25}, {0.50, 0.35, 0.02}},
    {{0.96, 0.90, 1.00}, {0.55, 0.15, 0.75}, {0.80, 0.45, 0.90}, {0.35, 0.05, 0.50}},
    {{1.00, 0.92, 0.95}, {0.85, 0.20, 0.50}, {0.95, 0.55, 0.70}, {0.55, 0.08, 0.30}},
    {{0.90, 0.98, 0.98}, {0.05, 0.55, 0.55}, {0.25, 0.80, 0.75}, {0.02, 0.35, 0.35}},
    {{0.94, 0.94, 0.94}, {0.25, 0.25, 0.30}, {0.55, 0.55, 0.65}, {0.10, 0.10, 0.15}},
}};

void fill_rect(ImageTensor& img, int x0, int y0, int x1, int y1,
               const std::array<double, 3>& color) {
    x0 = std::clamp(x0, 0, img.width);
    x1 = std::clamp(x1, 0, img.width);
    y0 = std::clamp(y0, 0, img.height);
    y1 = std::clamp(y1, 0, img.height);
    for (int c = 0; c < 3; ++c) {
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                img.at(c, y, x) = color[static_cast<std::size_t>(c)];
            }
        }
    }
}

// Brand-indexed glyph inside [x0,x0+size) x [y0,y0+size).
void draw_glyph(ImageTensor& img, int shape, int x0, int y0, int size,
                const std::array<double, 3>& color) {
    auto put = [&](int x, int y) {
        if (x >= 0 && x < img.width && y >= 0 && y < img.height) {
            for (int c = 0; c < 3; ++c) {
                img.at(c, y, x) = color[static_cast<std::size_t>(c)];
            }
        }
    };
    const double r = size / 2.0;
    const double cx = x0 + r;
    const double cy = y0 + r;
    for (int y = y0; y < y0 + size; ++y) {
        for (int x = x0; x < x0 + size; ++x) {
            const double dx = (x + 0.5 - cx) / r;
            const double dy = (y + 0.5 - cy) / r;
            bool on = false;
            switch (shape % 8) {
                case 0:  // solid square
                    on = true;
                    break;
                case 1:  // disk
                    on = dx * dx + dy * dy <= 1.0;
                    break;
                case 2:  // upward triangle
                    on = dy >= -1.0 && std::abs(dx) <= (dy + 1.0) / 2.0;
                    break;
                case 3:  // horizontal bars
                    on = ((y - y0) * 3 / size) % 2 == 0;
                    break;
                case 4:  // diamond
                    on = std::abs(dx) + std::abs(dy) <= 1.0;
                    break;
                case 5:  // ring
                    on = dx * dx + dy * dy <= 1.0 && dx * dx + dy * dy >= 0.4;
                    break;
                case 6:  // checker
                    on = (((x - x0) * 2 / size) + ((y - y0) * 2 / size)) % 2 == 0;
                    break;
                case 7:  // vertical bars
                    on = ((x - x0) * 3 / size) % 2 == 0;
                    break;
            }
            if (on) {
                put(x, y);
            }
        }
    }
}

std::array<double, 3> jitter_color(const std::array<double, 3>& color, Rng& rng, double amount) {
    std::array<double, 3> out;
    for (int c = 0; c < 3; ++c) {
        out[static_cast<std::size_t>(c)] = std::clamp(
            color[static_cast<std::size_t>(c)] + rng.uniform(-amount, amount), 0.0, 1.0);
    }
    return out;
}

}  // namespace

SynthPagesResult synth_pages(std::span<const std::string> brands, int pages_per_brand,
                             std::uint64_t seed, int image_size) {
    if (brands.size() < 2) {
        throw DataError("synth_pages: need at least 2 brands");
    }
    if (pages_per_brand < 1) {
        throw DataError("synth_pages: pages_per_brand must be >= 1");
    }
    if (image_size < 16) {
        throw DataError("synth_pages: image size must be >= 16");
    }

    Rng rng(seed);
    SynthPagesResult result;
    result.brands.assign(brands.begin(), brands.end());

    for (std::size_t bi = 0; bi < brands.size(); ++bi) {
        const Palette& pal = kPalettes[bi % kPalettes.size()];
        for (int pi = 0; pi < pages_per_brand; ++pi) {
            const std::string page_id = std::string(brands[bi]) + "-" + std::to_string(pi);
            ImageTensor img = ImageTensor::filled(image_size, image_size, pal.background[0],
                                                  pal.background[1], pal.background[2]);

            // Header bar with jittered height and hue.
            const int header_h = image_size / 8 + rng.uniform_int(5) - 2;
            fill_rect(img, 0, 0, image_size, std::max(3, header_h),
                      jitter_color(pal.header, rng, 0.04));

            // Button block in the lower half.
            const int bw = image_size / 3 + rng.uniform_int(image_size / 8);
            const int bh = image_size / 10 + rng.uniform_int(3);
            const int bx = rng.uniform_int(image_size - bw);
            const int by = image_size / 2 + rng.uniform_int(image_size / 3);
            fill_rect(img, bx, by, bx + bw, std::min(image_size, by + bh),
                      jitter_color(pal.accent, rng, 0.04));

            // Text-block noise: a few muted gray rectangles.
            const int noise_blocks = 2 + rng.uniform_int(3);
            for (int nb = 0; nb < noise_blocks; ++nb) {
                const int nw = 6 + rng.uniform_int(image_size / 4);
                const int nh = 2 + rng.uniform_int(3);
                const int nx = rng.uniform_int(std::max(1, image_size - nw));
                const int ny = rng.uniform_int(std::max(1, image_size - nh));
                const double gray = rng.uniform(0.55, 0.8);
                fill_rect(img, nx, ny, nx + nw, ny + nh, {gray, gray, gray});
            }

            // Logo glyph anywhere in frame; its box is the ground truth.
            // Size stays near one quarter of the frame (the jitter contract
            // covers shift, hue and noise, not scale).
            const int logo_size =
                std::max(2, image_size / 4 + rng.uniform_int(5) - 2);
            const int lx = rng.uniform_int(image_size - logo_size);
            const int ly = rng.uniform_int(image_size - logo_size);
            draw_glyph(img, static_cast<int>(bi), lx, ly, logo_size,
                       jitter_color(pal.logo, rng, 0.03));

            img.clamp();

            GroundTruthAnnotation ann;
            ann.image_id = page_id;
            ann.brand = brands[bi];
            ann.xmin = lx;
            ann.ymin = ly;
            ann.xmax = lx + logo_size;
            ann.ymax = ly + logo_size;
            ann.img_w = image_size;
            ann.img_h = image_size;
            ann.normalized = BoundingBox::from_corners(ann.xmin / ann.img_w, ann.ymin / ann.img_h,
                                                       ann.xmax / ann.img_w, ann.ymax / ann.img_h);
            result.annotations.push_back(ann);
            result.pages.push_back({page_id, std::string(brands[bi]), std::move(img)});
        }
    }
    return result;
}

}  // namespace phishdetect
