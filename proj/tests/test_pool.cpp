#include "support.hpp"

#include "ei/error.hpp"
#include "ei/pool.hpp"

#include <doctest.h>

#include <sstream>

using namespace ei;
using namespace ei::testing;

namespace {

Bee offer(std::uint32_t wh, std::uint32_t price, std::uint8_t who) {
    return make_bee(BeeKind::Offer, wh, price, mac(who));
}

Bee request(std::uint32_t wh, std::uint32_t price, std::uint8_t who) {
    return make_bee(BeeKind::Request, wh, price, mac(who));
}

std::vector<std::uint32_t> prices(const std::vector<PoolEntry>& entries) {
    std::vector<std::uint32_t> out;
    for (const auto& e : entries) out.push_back(e.bee.price_mcny_per_kwh);
    return out;
}

bool crossed(const BeePool& pool) {
    for (const auto& o : pool.offers()) {
        for (const auto& r : pool.requests()) {
            if (pool.compatible(o.bee, r.bee)) return true;
        }
    }
    return false;
}

} // namespace

TEST_CASE("browse") {
    BeePool pool;
    CHECK(pool.browse({}).empty());
    pool.submit(offer(1000, 500, 1));
    pool.submit(offer(1000, 400, 2));
    pool.submit(request(1000, 300, 3));
    pool.submit(request(1000, 350, 4));
    CHECK(prices(pool.browse_offers({})) == std::vector<std::uint32_t>{400, 500});
    CHECK(prices(pool.browse_requests({})) == std::vector<std::uint32_t>{350, 300});

    Bee late = offer(1000, 100, 5);
    late.delivery_start += 7200;  // starts when the others end
    pool.submit(late);
    PoolFilter first_window;
    first_window.window_start = 1'700'000'000;
    first_window.window_end = 1'700'000'000 + 7200;
    CHECK(prices(pool.browse_offers(first_window)) == std::vector<std::uint32_t>{400, 500});
    PoolFilter heat;
    heat.carrier = Carrier::Heat;
    CHECK(pool.browse(heat).empty());
}

TEST_CASE("partial fill of a resting offer") {
    BeePool pool;
    pool.submit(offer(10'000, 500, 1));
    const auto res = pool.submit(request(6'000, 600, 2));
    REQUIRE(res.fills.size() == 1);
    CHECK(res.fills[0].matched_wh == 6'000);
    CHECK(res.fills[0].clearing_price_mcny_per_kwh == 500);
    CHECK(!res.residual);
    REQUIRE(pool.offers().size() == 1);
    CHECK(pool.offers()[0].remaining_wh == 4'000);
    CHECK(pool.requests().empty());
}

TEST_CASE("price priority across offers") {
    BeePool pool;
    pool.submit(offer(5'000, 500, 1));
    pool.submit(offer(5'000, 400, 2));
    const auto res = pool.submit(request(8'000, 600, 3));
    REQUIRE(res.fills.size() == 2);
    CHECK(res.fills[0].matched_wh == 5'000);
    CHECK(res.fills[0].clearing_price_mcny_per_kwh == 400);
    CHECK(res.fills[1].matched_wh == 3'000);
    CHECK(res.fills[1].clearing_price_mcny_per_kwh == 500);
    REQUIRE(pool.offers().size() == 1);
    CHECK(pool.offers()[0].remaining_wh == 2'000);
}

TEST_CASE("FIFO within a price") {
    BeePool pool;
    pool.submit(offer(1'000, 500, 1));
    pool.submit(offer(1'000, 500, 2));
    const auto res = pool.submit(request(1'500, 500, 3));
    REQUIRE(res.fills.size() == 2);
    CHECK(res.fills[0].offer.bee.sender == mac(1));
    CHECK(res.fills[1].offer.bee.sender == mac(2));
    CHECK(res.fills[1].matched_wh == 500);
}

TEST_CASE("incompatible price rests") {
    BeePool pool;
    pool.submit(offer(1'000, 500, 1));
    const auto res = pool.submit(request(6'000, 300, 2));
    CHECK(res.fills.empty());
    REQUIRE(res.residual);
    CHECK(res.residual->remaining_wh == 6'000);
    CHECK(pool.requests().size() == 1);
}

TEST_CASE("windows must share a whole minute") {
    BeePool pool;
    Bee o = offer(1'000, 100, 1);
    Bee r = request(1'000, 200, 2);
    r.delivery_start = o.delivery_end() - 59;
    pool.submit(o);
    CHECK(pool.submit(r).fills.empty());

    pool.clear();
    r.delivery_start = o.delivery_end() - 150;
    pool.submit(o);
    const auto res = pool.submit(r);
    REQUIRE(res.fills.size() == 1);
    CHECK(res.fills[0].window.start == r.delivery_start);
    CHECK(res.fills[0].window.duration_min == 2);  // 150 s floored to whole minutes
}

TEST_CASE("expired entries are purged") {
    BeePool pool;
    pool.submit(offer(1'000, 100, 1));
    Bee r = request(1'000, 200, 2);
    r.delivery_start += 3600;
    const auto res = pool.submit(r, 1'700'000'000 + 7200);
    CHECK(res.fills.empty());
    CHECK(pool.offers().empty());
}

TEST_CASE("only offers and requests enter") {
    BeePool pool;
    try {
        pool.submit(settle(1, 1, mac(1), mac(2)));
        FAIL("expected IncompatibleKind");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::IncompatibleKind);
    }
}

TEST_CASE("compatibility hook for green-only requests") {
    BeePool pool;
    pool.set_compatibility_hook([](const Bee& o, const Bee& r) {
        return r.grade != 1 || o.green_fraction_bp == kMaxGreenFractionBp;
    });
    Bee brown = offer(1'000, 100, 1);
    Bee green = offer(1'000, 300, 2);
    green.green_fraction_bp = kMaxGreenFractionBp;
    pool.submit(brown);
    pool.submit(green);
    Bee picky = request(1'000, 400, 3);
    picky.grade = 1;
    const auto res = pool.submit(picky);
    REQUIRE(res.fills.size() == 1);
    CHECK(res.fills[0].offer.bee.sender == mac(2));
    CHECK(settle_bee_for(res.fills[0]).green_fraction_bp == kMaxGreenFractionBp);
}

TEST_CASE("greedy matching equals the exhaustive oracle") {
    std::mt19937_64 rng(2024);
    int steps = 0;
    for (int pool_no = 0; pool_no < 200; ++pool_no) {
        BeePool pool;
        const int entries = 2 + static_cast<int>(rng() % 5);
        for (int i = 0; i < entries; ++i) {
            Bee b = (rng() % 2 ? offer : request)(static_cast<std::uint32_t>(1 + rng() % 6),
                                                 static_cast<std::uint32_t>(100 * (1 + rng() % 4)),
                                                 static_cast<std::uint8_t>(i + 1));
            b.delivery_start += static_cast<std::uint32_t>(3600 * (rng() % 3));
            const std::vector<PoolEntry> resting = b.kind == BeeKind::Offer ? pool.requests() : pool.offers();
            const OracleResult want = brute_force_match(b, resting);
            const MatchResult got = pool.submit(b);
            std::uint64_t cost = 0;
            for (const auto& f : got.fills) cost += std::uint64_t{f.matched_wh} * f.clearing_price_mcny_per_kwh;
            CHECK(got.matched_wh() == want.quantity);
            CHECK(cost == want.buyer_cost);
            CHECK_FALSE(crossed(pool));
            ++steps;
        }
    }
    CHECK(steps >= 400);
}

namespace {

struct Market {
    Ledger ledger;
    Network net{ledger};
    BeePool pool;
    EnergyIpAddress seller, local_buyer, remote_buyer;

    Market() {
        const auto a = net.add_router("A", 1, 1);
        const auto b = net.add_router("B", 1, 2);
        net.connect_routers(a, b);
        for (std::uint8_t i = 1; i <= 3; ++i) ledger.register_card(mac(i), "m" + std::to_string(i));
        seller = net.assign_eip(a, mac(1));
        local_buyer = net.assign_eip(a, mac(2));
        remote_buyer = net.assign_eip(b, mac(3));
    }

    /// Resting quantity plus what left the pool: each settled Wh was taken
    /// from one offer and one request.
    std::uint64_t total() const {
        std::uint64_t settled = 0;
        for (const auto& bytes : ledger.event_log()) settled += decode_bee(bytes).quantity_wh;
        return pool.resting_wh() + 2 * settled;
    }
};

} // namespace

TEST_CASE("one fill settles into both profiles") {
    Market m;
    m.pool.submit(offer(4'000, 500, 1));
    const auto res = m.pool.submit(request(4'000, 500, 2));
    const auto out = m.pool.settle_fills(res, m.ledger, m.net);
    REQUIRE(out.settled.size() == 1);
    CHECK(out.failed.empty());
    CHECK(out.settled[0].sender == mac(1));
    CHECK(out.settled[0].receiver == mac(2));
    CHECK(m.ledger.query_profile(mac(1)).trades.size() == 1);
    CHECK(m.ledger.query_profile(mac(2)).net_energy_wh == 4'000);
    CHECK(m.pool.empty());
}

TEST_CASE("a fill refused by the dynamic limit returns to the pool") {
    Market m;
    m.net.update_dynamic_limit(m.seller, 1'000);
    m.pool.submit(offer(3'000, 500, 1));
    const auto before = m.total();
    const auto res = m.pool.submit(request(3'000, 500, 3));
    const auto out = m.pool.settle_fills(res, m.ledger, m.net);
    CHECK(out.settled.empty());
    REQUIRE(out.failed.size() == 1);
    CHECK(out.failed[0].error == Errc::DynamicLimitExceeded);
    CHECK(m.pool.offers().size() == 1);
    CHECK(m.pool.offers()[0].remaining_wh == 3'000);
    CHECK(m.pool.offers()[0].arrival_seq == 1);
    CHECK(m.pool.requests().size() == 1);
    CHECK(m.pool.requests()[0].remaining_wh == 3'000);
    CHECK(m.total() == before + 3'000);  // the request now rests as well
}

TEST_CASE("two fills, one fails") {
    Market m;
    m.net.update_dynamic_limit(m.seller, 0);
    m.pool.submit(request(2'000, 600, 2));  // same LAN, unlimited
    m.pool.submit(request(2'000, 600, 3));  // other LAN, valve closed
    const auto before = m.total();
    const auto res = m.pool.submit(offer(4'000, 500, 1));
    const auto out = m.pool.settle_fills(res, m.ledger, m.net);
    CHECK(out.settled.size() == 1);
    CHECK(out.failed.size() == 1);
    CHECK(out.settled[0].receiver == mac(2));
    CHECK(m.total() == before + 4'000);
    CHECK(m.pool.resting_wh() == 2'000 + 2'000);
    CHECK(m.ledger.settlement_count() == 1);
}

TEST_CASE("csv round trip") {
    BeePool pool;
    pool.submit(offer(1'000, 500, 1));
    pool.submit(request(700, 300, 2));
    pool.submit(offer(2'000, 400, 3));
    std::stringstream csv;
    pool.write_csv(csv);
    const BeePool back = BeePool::read_csv(csv);
    CHECK(back.offers() == pool.offers());
    CHECK(back.requests() == pool.requests());

    std::stringstream bad("side,arrival_seq,remaining_wh,bee_hex\nsideways,1,2,00\n");
    CHECK_THROWS_AS(BeePool::read_csv(bad), Error);
}
