// features.cc

// Copyright 2026  The lseend Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "lseend/features.h"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace lseend {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MatrixD MelFilterbank(const LogMelOptions& opts) {
  const int n_bins = opts.fft_size / 2 + 1;
  const double lo = HzToMel(opts.low_hz), hi = HzToMel(opts.high_hz);
  std::vector<double> edges(opts.n_mels + 2);
  for (int i = 0; i < opts.n_mels + 2; ++i)
    edges[i] = MelToHz(lo + (hi - lo) * i / (opts.n_mels + 1));
  MatrixD fb = MatrixD::Zero(opts.n_mels, n_bins);
  for (int m = 0; m < opts.n_mels; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * opts.sample_rate / opts.fft_size;
      if (f > left && f < right)
        fb(m, k) = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
    }
  }
  return fb;
}

FeatureSequence LogMel(const Waveform& wav, const LogMelOptions& opts) {
  if (wav.sample_rate != opts.sample_rate)
    throw InvalidArgument("logmel: expected " + std::to_string(opts.sample_rate) +
                          " Hz input, got " + std::to_string(wav.sample_rate));
  Require(opts.window <= opts.fft_size && opts.hop > 0, "logmel: bad framing options");
  FeatureSequence out;
  out.frame_period = static_cast<double>(opts.hop) / opts.sample_rate;
  const int64_t n = static_cast<int64_t>(wav.samples.size());
  const int n_frames = static_cast<int>((n + opts.hop - 1) / opts.hop);
  out.data.resize(n_frames, opts.n_mels);
  if (n_frames == 0) return out;

  const MatrixD fb = MelFilterbank(opts);
  std::vector<double> hann(opts.window);
  for (int i = 0; i < opts.window; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (opts.window - 1));

  const int n_bins = opts.fft_size / 2 + 1;
  std::unique_ptr<double, decltype(&fftw_free)> in(
      static_cast<double*>(fftw_malloc(sizeof(double) * opts.fft_size)), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> spec(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins)), &fftw_free);
  fftw_plan plan = fftw_plan_dft_r2c_1d(opts.fft_size, in.get(), spec.get(), FFTW_ESTIMATE);

  ColVector<double> power(n_bins);
  for (int i = 0; i < n_frames; ++i) {
    const int64_t center = static_cast<int64_t>(i) * opts.hop + opts.hop / 2;
    const int64_t start = center - opts.window / 2;
    std::fill(in.get(), in.get() + opts.fft_size, 0.0);
    for (int j = 0; j < opts.window; ++j) {
      const int64_t idx = start + j;
      if (idx >= 0 && idx < n) in.get()[j] = hann[j] * wav.samples[idx];
    }
    fftw_execute(plan);
    for (int k = 0; k < n_bins; ++k)
      power(k) = spec.get()[k][0] * spec.get()[k][0] + spec.get()[k][1] * spec.get()[k][1];
    const ColVector<double> energy = fb * power;
    for (int m = 0; m < opts.n_mels; ++m)
      out.data(i, m) = static_cast<float>(std::log(std::max(energy(m), opts.energy_floor)));
  }
  fftw_destroy_plan(plan);
  return out;
}

FeatureSequence SpliceSubsample(const FeatureSequence& raw) {
  const int t_raw = raw.frames();
  const int f = raw.dim();
  const int ctx = kSpliceContext;
  const int n_out = (t_raw + kSubsampling - 1) / kSubsampling;
  FeatureSequence out;
  out.frame_period = raw.frame_period * kSubsampling;
  out.data.resize(n_out, f * (2 * ctx + 1));
  for (int k = 0; k < n_out; ++k) {
    const int center = k * kSubsampling;
    for (int c = -ctx; c <= ctx; ++c) {
      const int src = std::clamp(center + c, 0, t_raw - 1);
      out.data.row(k).segment((c + ctx) * f, f) = raw.data.row(src);
    }
  }
  return out;
}

template <typename T>
RowVector<T> CmnStep(const RowVector<T>& x, CmnState<T>* state) {
  Require(state != nullptr, "cmn: missing state");
  if (state->mu.size() == 0) state->mu = RowVector<T>::Zero(x.size());
  Require(state->mu.size() == x.size(), "cmn: dimension mismatch");
  state->count += 1;
  const T t = static_cast<T>(state->count);
  state->mu = ((t - T(1)) / t) * state->mu + (T(1) / t) * x;
  return x - state->mu;
}

template <typename T>
Matrix<T> CumulativeMeanNormalize(const Matrix<T>& x) {
  CmnState<T> st(static_cast<int>(x.cols()));
  Matrix<T> out(x.rows(), x.cols());
  for (int t = 0; t < x.rows(); ++t) out.row(t) = CmnStep<T>(x.row(t), &st);
  return out;
}

template RowVector<float> CmnStep(const RowVector<float>&, CmnState<float>*);
template RowVector<double> CmnStep(const RowVector<double>&, CmnState<double>*);
template Matrix<float> CumulativeMeanNormalize(const Matrix<float>&);
template Matrix<double> CumulativeMeanNormalize(const Matrix<double>&);

namespace {

void PutU32(std::string* s, uint32_t v) { s->append(reinterpret_cast<const char*>(&v), 4); }

uint32_t GetU32(const std::string& s, size_t off) {
  uint32_t v;
  std::memcpy(&v, s.data() + off, 4);
  return v;
}

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteAll(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

std::string EncodeFeatureFile(const MatrixF& m) {
  std::string s = "FEAT";
  PutU32(&s, static_cast<uint32_t>(m.rows()));
  PutU32(&s, static_cast<uint32_t>(m.cols()));
  PutU32(&s, kFeatureFileVersion);
  s.append(reinterpret_cast<const char*>(m.data()), sizeof(float) * m.size());
  return s;
}

MatrixF DecodeFeatureFile(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "FEAT") != 0)
    throw IoError("feature file: bad magic");
  const uint32_t t = GetU32(bytes, 4), f = GetU32(bytes, 8), version = GetU32(bytes, 12);
  if (version != kFeatureFileVersion)
    throw IoError("feature file: unsupported version " + std::to_string(version));
  const size_t payload = static_cast<size_t>(t) * f * sizeof(float);
  if (bytes.size() != 16 + payload) throw IoError("feature file: truncated payload");
  MatrixF m(t, f);
  if (payload > 0) std::memcpy(m.data(), bytes.data() + 16, payload);
  return m;
}

void WriteFeatureFile(const std::string& path, const MatrixF& m) {
  WriteAll(path, EncodeFeatureFile(m));
}

MatrixF ReadFeatureFile(const std::string& path) { return DecodeFeatureFile(ReadAll(path)); }

Waveform ReadWav(const std::string& path) {
  const std::string b = ReadAll(path);
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0)
    throw IoError(path + ": not a RIFF/WAVE file");
  Waveform wav;
  bool have_fmt = false;
  size_t off = 12;
  while (off + 8 <= b.size()) {
    const std::string id = b.substr(off, 4);
    const uint32_t size = GetU32(b, off + 4);
    const size_t body = off + 8;
    if (body + size > b.size()) throw IoError(path + ": truncated chunk " + id);
    if (id == "fmt ") {
      uint16_t format, channels, bits;
      std::memcpy(&format, b.data() + body, 2);
      std::memcpy(&channels, b.data() + body + 2, 2);
      wav.sample_rate = static_cast<int>(GetU32(b, body + 4));
      std::memcpy(&bits, b.data() + body + 14, 2);
      if (format != 1 || channels != 1 || bits != 16)
        throw IoError(path + ": only 16-bit PCM mono is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError(path + ": data chunk before fmt chunk");
      wav.samples.resize(size / 2);
      std::memcpy(wav.samples.data(), b.data() + body, wav.samples.size() * 2);
      return wav;
    }
    off = body + size + (size & 1);
  }
  throw IoError(path + ": no data chunk");
}

void WriteWav(const std::string& path, const Waveform& wav) {
  const uint32_t data_bytes = static_cast<uint32_t>(wav.samples.size() * 2);
  std::string s = "RIFF";
  PutU32(&s, 36 + data_bytes);
  s += "WAVEfmt ";
  PutU32(&s, 16);
  const uint16_t fmt[2] = {1, 1};
  s.append(reinterpret_cast<const char*>(fmt), 4);
  PutU32(&s, static_cast<uint32_t>(wav.sample_rate));
  PutU32(&s, static_cast<uint32_t>(wav.sample_rate * 2));
  const uint16_t align_bits[2] = {2, 16};
  s.append(reinterpret_cast<const char*>(align_bits), 4);
  s += "data";
  PutU32(&s, data_bytes);
  s.append(reinterpret_cast<const char*>(wav.samples.data()), data_bytes);
  WriteAll(path, s);
}

}  // namespace lseend
