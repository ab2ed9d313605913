// Serial reference vs OpenMP kernels on image-sized masks.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "foliage/image.hpp"
#include "foliage/kernels.hpp"
#include "foliage/rng.hpp"

#ifdef FOLIAGE_HAVE_OPENMP
#include <omp.h>
#endif

using namespace foliage;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() / reps;
}

BinaryMask random_mask(int w, int h, std::uint64_t seed) {
  BinaryMask m(w, h);
  Rng rng(seed);
  for (auto& b : m.bits()) b = rng.uniform01() < 0.4 ? 1 : 0;
  return m;
}

void report(const char* name, double serial, double parallel) {
  std::printf("%-18s reference %9.3f ms   kernels %9.3f ms   ratio %6.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const int w = argc > 1 ? std::stoi(argv[1]) : 1920;
  const int h = argc > 2 ? std::stoi(argv[2]) : 1080;
  const int reps = argc > 3 ? std::stoi(argv[3]) : 20;
#ifdef FOLIAGE_HAVE_OPENMP
  std::printf("%dx%d, %d reps, %d OpenMP threads\n", w, h, reps, omp_get_max_threads());
#else
  std::printf("%dx%d, %d reps, OpenMP disabled\n", w, h, reps);
#endif

  const BinaryMask a = random_mask(w, h, 1);
  const BinaryMask b = random_mask(w, h, 2);
  BinaryMask out(w, h);
  report("and_not", time_ms(reps, [&] { reference::and_not(a, b, out); }),
         time_ms(reps, [&] { kernels::and_not(a, b, out); }));

  BinaryMask acc = a;
  report("or_into", time_ms(reps, [&] { reference::or_into(acc, b); }),
         time_ms(reps, [&] { kernels::or_into(acc, b); }));

  volatile std::int64_t sink = 0;
  report("popcount", time_ms(reps, [&] { sink = sink + reference::popcount(a); }),
         time_ms(reps, [&] { sink = sink + kernels::popcount(a); }));

  Rng rng(3);
  Polygon star;
  for (int k = 0; k < 64; ++k) star.push_back({rng.uniform(0, w), rng.uniform(0, h)});
  const std::vector<Polygon> polys{star};
  report("fill_polygons", time_ms(reps, [&] { reference::fill_polygons(polys, out); }),
         time_ms(reps, [&] { kernels::fill_polygons(polys, out); }));

  RgbaImage sprite(w / 2, h);
  for (std::size_t i = 0; i < sprite.data().size(); ++i) sprite.data()[i] = std::uint8_t(rng.uniform_int(0, 255));
  const BinaryMask sprite_mask = random_mask(w / 2, h, 4);
  SourceMapping map;
  map.a = 0.9;
  map.b = 0.1;
  map.c = -0.1;
  map.d = 0.9;
  map.tx = -w / 4.0;
  const PixelRect window{0, 0, w, h};
  RgbImage canvas(w, h);
  BinaryMask occ(w, h);
  report("composite_masked", time_ms(reps, [&] { reference::composite_masked(canvas, sprite, sprite_mask, map, window, occ); }),
         time_ms(reps, [&] { kernels::composite_masked(canvas, sprite, sprite_mask, map, window, occ); }));
  return 0;
}
