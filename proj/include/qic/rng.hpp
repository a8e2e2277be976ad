// Copyright 2026 The qiclab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qic/config.hpp"

namespace qic {

/// Deterministic random stream addressed by (master seed, index path).
///
/// Stream (m, p) always yields the same sequence, and distinct paths are
/// independent streams, so a trial's randomness never depends on which worker
/// ran it or in which order.
class RngStream {
public:
    using Engine = std::mt19937_64;

    explicit RngStream(std::uint64_t master, std::vector<std::uint64_t> path = {})
        : master_(master), path_(std::move(path)) {}

    std::uint64_t master() const noexcept { return master_; }
    const std::vector<std::uint64_t>& path() const noexcept { return path_; }

    RngStream child(std::uint64_t index) const {
        auto p = path_;
        p.push_back(index);
        return RngStream(master_, std::move(p));
    }

    Engine engine() const {
        std::vector<std::uint32_t> words;
        words.reserve(2 * path_.size() + 3);
        // Tag with the path length so (m, [0]) and (m, [0, 0]) never alias.
        words.push_back(static_cast<std::uint32_t>(path_.size()));
        words.push_back(static_cast<std::uint32_t>(master_));
        words.push_back(static_cast<std::uint32_t>(master_ >> 32));
        for (auto v : path_) {
            words.push_back(static_cast<std::uint32_t>(v));
            words.push_back(static_cast<std::uint32_t>(v >> 32));
        }
        std::seed_seq seq(words.begin(), words.end());
        return Engine(seq);
    }

    std::string label() const {
        std::ostringstream os;
        os << master_;
        for (auto v : path_) os << '/' << v;
        return os.str();
    }

    friend bool operator==(const RngStream& a, const RngStream& b) {
        return a.master_ == b.master_ && a.path_ == b.path_;
    }

private:
    std::uint64_t master_;
    std::vector<std::uint64_t> path_;
};

/// Standard complex Gaussian draws (independent N(0,1/2) real and imaginary parts).
class ComplexGaussian {
public:
    explicit ComplexGaussian(const RngStream& stream) : engine_(stream.engine()), normal_(0.0, M_SQRT1_2) {}

    Complex operator()() {
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {re, im};
    }

    double uniform01() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

private:
    RngStream::Engine engine_;
    std::normal_distribution<double> normal_;
};

}  // namespace qic
