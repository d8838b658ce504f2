// SPDX-License-Identifier: Apache-2.0
//
// wrfsplat - wireless radiance field reconstruction via deformable 2D Gaussian splatting
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "wrfsplat/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <omp.h>

namespace wrfsplat
{

double Rng::normal()
{
    // u1 in (0, 1] so the log is finite; u2 in [0, 1)
    double u1 = double((gen() >> 11) + 1) * 0x1.0p-53;
    double u2 = double(gen() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
}

std::uint64_t fnv1a64(const void *data, std::size_t size)
{
    const auto *p = static_cast<const unsigned char *>(data);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::size_t i = 0; i < size; i++)
    {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string to_hex(std::uint64_t value)
{
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

static std::atomic<int> g_threads{0};

int thread_count()
{
    int n = g_threads.load(std::memory_order_relaxed);
    if (n > 0)
        return n;
    if (const char *env = std::getenv("WRF_THREADS"))
    {
        int parsed = std::atoi(env);
        if (parsed > 0)
        {
            set_thread_count(parsed);
            return parsed;
        }
    }
    n = omp_get_max_threads();
    g_threads.store(n, std::memory_order_relaxed);
    return n;
}

void set_thread_count(int n)
{
    if (n < 1)
        throw std::invalid_argument("thread count must be >= 1");
    g_threads.store(n, std::memory_order_relaxed);
    omp_set_num_threads(n);
}

namespace io
{
    void put_bytes(std::ostream &os, const void *p, std::size_t n)
    {
        os.write(static_cast<const char *>(p), std::streamsize(n));
        if (!os)
            throw std::runtime_error("write failed");
    }

    void put_u32(std::ostream &os, std::uint32_t v) { put_bytes(os, &v, 4); }
    void put_u64(std::ostream &os, std::uint64_t v) { put_bytes(os, &v, 8); }
    void put_f32(std::ostream &os, float v) { put_bytes(os, &v, 4); }
    void put_f32_array(std::ostream &os, const float *p, std::size_t n)
    {
        put_bytes(os, p, 4 * n);
    }

    void get_bytes(std::istream &is, void *p, std::size_t n)
    {
        is.read(static_cast<char *>(p), std::streamsize(n));
        if (std::size_t(is.gcount()) != n)
            throw std::runtime_error("unexpected end of file");
    }

    std::uint32_t get_u32(std::istream &is)
    {
        std::uint32_t v;
        get_bytes(is, &v, 4);
        return v;
    }

    std::uint64_t get_u64(std::istream &is)
    {
        std::uint64_t v;
        get_bytes(is, &v, 8);
        return v;
    }

    float get_f32(std::istream &is)
    {
        float v;
        get_bytes(is, &v, 4);
        return v;
    }

    void get_f32_array(std::istream &is, float *p, std::size_t n)
    {
        get_bytes(is, p, 4 * n);
    }

    void put_magic(std::ostream &os, const char magic[5]) { put_bytes(os, magic, 4); }

    void expect_magic(std::istream &is, const char magic[5], const char *what)
    {
        char buf[4];
        get_bytes(is, buf, 4);
        if (std::memcmp(buf, magic, 4) != 0)
            throw std::runtime_error(std::string("bad magic, not a ") + what);
    }
} // namespace io

std::string fmt_g9(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

} // namespace wrfsplat
