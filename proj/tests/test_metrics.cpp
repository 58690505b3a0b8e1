#include <doctest.h>

#include <cmath>
#include <numeric>

#include "blocksim/error.h"
#include "blocksim/metrics.h"

using namespace blocksim;

namespace {

Request finished_request(RequestId id, double arrival, double dispatch, double first,
                         double finish) {
  Request r;
  r.id = id;
  r.prompt_tokens = 10;
  r.true_output_tokens = 5;
  r.estimated_output_tokens = 5;
  r.decoded_tokens = 5;
  r.arrival_time = SimTime::from_seconds(arrival);
  r.dispatch_time = SimTime::from_seconds(dispatch);
  r.first_token_time = SimTime::from_seconds(first);
  r.finish_time = SimTime::from_seconds(finish);
  r.state = RequestState::kFinished;
  return r;
}

RunReport synthetic_report(double p99_ttft) {
  RunReport report;
  report.p99_ttft_s = p99_ttft;
  return report;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("nearest-rank percentiles") {
  std::vector<double> values = {5, 1, 4, 2, 3};
  CHECK(percentile_nearest_rank(values, 50.0) == 3);
  CHECK(percentile_nearest_rank(values, 99.0) == 5);
  CHECK(percentile_nearest_rank(values, 20.0) == 1);
  CHECK(percentile_nearest_rank({7.0}, 99.0) == 7.0);
}

TEST_CASE("p99 of one hundred identical values is that value") {
  std::vector<double> same(100, 1.25);
  CHECK(percentile_nearest_rank(same, 99.0) == 1.25);
}

TEST_CASE("aggregate computes ttft and e2e from timestamps") {
  RunLog log;
  log.requests.push_back(finished_request(0, 0.0, 0.0, 0.5, 2.0));
  log.preempt_counts = {0};
  const RunReport report = aggregate(log);
  CHECK(report.finished_requests == 1);
  CHECK(report.censored_requests == 0);
  CHECK(report.mean_ttft_s == doctest::Approx(0.5));
  CHECK(report.mean_e2e_s == doctest::Approx(2.0));
  CHECK(report.p99_ttft_s == doctest::Approx(0.5));
  CHECK(report.throughput_rps == doctest::Approx(0.5));  // 1 finished over 2s
}

TEST_CASE("unfinished requests are reported censored, not fatal") {
  RunLog log;
  log.requests.push_back(finished_request(0, 0.0, 0.0, 0.5, 2.0));
  Request hung;
  hung.id = 1;
  hung.arrival_time = SimTime::from_seconds(1.0);
  hung.state = RequestState::kRunning;
  log.requests.push_back(hung);
  log.preempt_counts = {0, 0};
  const RunReport report = aggregate(log);
  CHECK(report.incomplete);
  CHECK(report.censored_requests == 1);
  CHECK(report.finished_requests == 1);
  REQUIRE(report.request_rows.size() == 2);
  CHECK(report.request_rows[1].censored);
}

TEST_CASE("aggregate matches an independent brute-force pass") {
  // Build an ad-hoc log, then recompute every aggregate with plain loops.
  RunLog log;
  std::vector<double> e2e_expected, ttft_expected;
  double arrival = 0;
  for (int i = 0; i < 257; ++i) {
    const double a = arrival;
    const double d = a + 0.001 * (i % 3);
    const double f = d + 0.05 + 0.0001 * ((i * 7) % 11);
    const double z = f + 0.2 + 0.0003 * ((i * 13) % 17);
    log.requests.push_back(finished_request(static_cast<RequestId>(i), a, d, f, z));
    ttft_expected.push_back(f - d);
    e2e_expected.push_back(z - a);
    arrival += 0.01;
  }
  log.preempt_counts.assign(log.requests.size(), 0);
  const RunReport report = aggregate(log);

  auto brute_mean = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto brute_percentile = [](std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const auto rank =
        static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(rank, 1) - 1];
  };
  CHECK(report.mean_ttft_s == doctest::Approx(brute_mean(ttft_expected)).epsilon(1e-12));
  CHECK(report.mean_e2e_s == doctest::Approx(brute_mean(e2e_expected)).epsilon(1e-12));
  CHECK(report.p99_ttft_s == doctest::Approx(brute_percentile(ttft_expected, 99)).epsilon(1e-12));
  CHECK(report.p50_e2e_s == doctest::Approx(brute_percentile(e2e_expected, 50)).epsilon(1e-12));
  const double span = (log.requests.back().finish_time->seconds() -
                       log.requests.front().arrival_time.seconds());
  CHECK(report.throughput_rps == doctest::Approx(257.0 / span).epsilon(1e-12));
}

TEST_CASE("probe sampling hits everything at p=1 and nothing at p=0") {
  const ProbeSampler all(1.0, 3);
  const ProbeSampler none(0.0, 3);
  for (RequestId id = 0; id < 500; ++id) {
    CHECK(all.sampled(id));
    CHECK(!none.sampled(id));
  }
}

TEST_CASE("probe sampling at 1% lands within 3 sigma over 10k requests") {
  const ProbeSampler sampler(0.01, 11);
  int count = 0;
  for (RequestId id = 0; id < 10000; ++id) {
    if (sampler.sampled(id)) ++count;
  }
  // Binomial(10000, 0.01): mean 100, sigma ~= 9.95.
  CHECK(std::abs(count - 100) <= 30);
}

TEST_CASE("capacity search finds an integer threshold") {
  auto runner = [](double qps) { return synthetic_report(qps <= 30.0 ? 1.0 : 5.0); };
  const CapacityResult result = capacity_search(runner, SloSpec{3.0}, 25, 35);
  CHECK(result.capacity_qps == doctest::Approx(30.0));
  CHECK(result.bracket_pass == 30);
  CHECK(result.bracket_fail == 31);
  CHECK(result.monotone);
}

TEST_CASE("capacity search resolves tenths inside the bracket") {
  auto runner = [](double qps) { return synthetic_report(qps <= 27.9 ? 1.0 : 5.0); };
  const CapacityResult result = capacity_search(runner, SloSpec{3.0}, 20, 32);
  CHECK(result.bracket_pass == 27);
  CHECK(result.bracket_fail == 28);
  CHECK(result.capacity_qps == doctest::Approx(27.9));
}

TEST_CASE("an slo violated at the lowest qps is NoCapacity") {
  auto runner = [](double) { return synthetic_report(10.0); };
  CHECK_THROWS_AS(capacity_search(runner, SloSpec{3.0}, 1, 5), NoCapacityError);
}

TEST_CASE("non-monotone runners are flagged, with the bracket reported") {
  auto runner = [](double qps) {
    const bool pass = qps <= 10.0 || (qps >= 12.0 && qps <= 12.99);
    return synthetic_report(pass ? 1.0 : 5.0);
  };
  const CapacityResult result = capacity_search(runner, SloSpec{3.0}, 8, 14);
  CHECK(!result.monotone);
  CHECK(result.bracket_pass == 10);
}

TEST_CASE("gaussian smoothing: identity, constants, and impulse mass") {
  const std::vector<double> series = {1, 2, 3, 4, 5};
  CHECK(smooth(series, 0.0) == series);

  const std::vector<double> constant(64, 3.25);
  const auto smoothed = smooth(constant, 2.5);
  for (double v : smoothed) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));

  std::vector<double> impulse(101, 0.0);
  impulse[50] = 1.0;
  const auto bell = smooth(impulse, 3.0);
  CHECK(bell.size() == impulse.size());
  const double mass = std::accumulate(bell.begin(), bell.end(), 0.0);
  CHECK(std::abs(mass - 1.0) < 1e-9);
  CHECK(bell[50] > bell[47]);
  CHECK(bell[47] == doctest::Approx(bell[53]).epsilon(1e-12));  // symmetric
  CHECK(bell[50] < 1.0);
}

TEST_CASE("smoothing near the edges reflects instead of shrinking") {
  std::vector<double> edge(10, 0.0);
  edge[0] = 1.0;
  const auto smoothed = smooth(edge, 1.5);
  const double mass = std::accumulate(smoothed.begin(), smoothed.end(), 0.0);
  CHECK(std::abs(mass - 1.0) < 1e-9);  // reflection preserves mass
}

}  // TEST_SUITE
