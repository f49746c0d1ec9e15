// Test-only reference implementations, kept independent of the library's
// computation paths on purpose.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace oracles {

// Airtime reference: payload symbol count in exact integer arithmetic,
// times in long double seconds.
inline long double reference_toa_ms(int sf, long bw_hz, int cr, int payload,
                                    int preamble, bool crc, bool explicit_hdr) {
  const long double t_sym_s =
      static_cast<long double>(1L << sf) / static_cast<long double>(bw_hz);
  const bool ldro = t_sym_s > 0.016L;
  const long long numer = 8LL * payload - 4LL * sf + 28 + (crc ? 16 : 0) -
                          (explicit_hdr ? 0 : 20);
  const long long denom = 4LL * (sf - (ldro ? 2 : 0));
  long long ceil_frac;
  if (numer > 0)
    ceil_frac = (numer + denom - 1) / denom;
  else
    ceil_frac = numer / denom;  // truncation is ceiling for non-positive
  long long payload_syms = ceil_frac * (cr + 4);
  if (payload_syms < 0) payload_syms = 0;
  const long double total_syms =
      (preamble + 4.25L) + (8.0L + payload_syms);
  return total_syms * t_sym_s * 1000.0L;
}

// Exhaustive pairwise collision check.
struct Frame {
  std::int64_t id;
  int ch;
  int sf;
  std::int64_t start;
  std::int64_t end;
  double rssi;
};

inline std::map<std::int64_t, bool> pairwise_survivors(
    const std::vector<Frame>& frames, bool capture, double threshold_db) {
  std::map<std::int64_t, bool> ok;
  for (const Frame& f : frames) ok[f.id] = true;
  for (const Frame& a : frames) {
    for (const Frame& b : frames) {
      if (a.id == b.id) continue;
      const bool conflict = a.ch == b.ch && a.sf == b.sf && a.start < b.end &&
                            b.start < a.end;
      if (!conflict) continue;
      if (!capture || a.rssi < b.rssi + threshold_db) ok[a.id] = false;
    }
  }
  return ok;
}

}  // namespace oracles
