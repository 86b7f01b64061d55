#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "nesy/chess.hpp"

using namespace nesy;

namespace {

Board make_board(Piece bk, Piece w1, Piece w2) { return Board{{bk, w1, w2}}; }

bool kings_adjacent(const Board& b) {
    for (const auto& p : b.pieces)
        if (p.code == kWK)
            return std::abs(p.x - b.pieces[0].x) <= 1 && std::abs(p.y - b.pieces[0].y) <= 1;
    return false;
}

// single constant-valued glyph per code; makes placement and scaling exact
GlyphSource flat_glyphs() {
    GlyphSource g;
    for (int code = 0; code < 8; ++code)
        g.pools[code].push_back(std::vector<float>(784, code / 10.0f));
    return g;
}

}  // namespace

TEST_CASE("board enumeration yields 7560 distinct legal placements") {
    const auto boards = enumerate_boards();
    REQUIRE(boards.size() == 7560);
    std::set<Assignment> seen;
    for (const auto& b : boards) {
        CHECK(b.pieces[0].code == kBK);
        CHECK(b.pieces[1].code != b.pieces[2].code);
        CHECK(b.pieces[1].code >= kWR);
        CHECK(b.pieces[2].code <= kWQ);
        std::set<std::pair<int, int>> squares;
        for (const auto& p : b.pieces) {
            CHECK(p.x >= 1);
            CHECK(p.x <= 3);
            CHECK(p.y >= 1);
            CHECK(p.y <= 3);
            squares.insert({p.x, p.y});
        }
        CHECK(squares.size() == 3);
        CHECK(seen.insert(board_to_assignment(b)).second);
    }
}

TEST_CASE("hand-checked positions classify correctly") {
    // queen covers every flight square and is defended: mate
    CHECK(classify_board(make_board({kBK, 1, 1}, {kWQ, 2, 2}, {kWK, 3, 3})) == ChessLabel::Mate);
    // same queen one file over covers the flight squares without check: stalemate
    CHECK(classify_board(make_board({kBK, 1, 1}, {kWQ, 3, 2}, {kWK, 3, 3})) == ChessLabel::Draw);
    // rook and bishop leave the king moves: safe
    CHECK(classify_board(make_board({kBK, 1, 1}, {kWR, 3, 3}, {kWB, 3, 2})) == ChessLabel::Safe);
    // adjacent kings are never a position
    CHECK(classify_board(make_board({kBK, 1, 1}, {kWK, 2, 2}, {kWQ, 3, 3})) == ChessLabel::Illegal);
    // check with an escape square: black was already lost or it is not black to move
    CHECK(classify_board(make_board({kBK, 1, 1}, {kWR, 1, 3}, {kWB, 3, 3})) == ChessLabel::Illegal);
}

TEST_CASE("pawns attack diagonally upward only") {
    CHECK(black_in_check(make_board({kBK, 1, 2}, {kWP, 2, 1}, {kWR, 3, 3})));
    CHECK(black_in_check(make_board({kBK, 3, 2}, {kWP, 2, 1}, {kWR, 3, 3})));
    // straight ahead is no pawn attack; rook parked away from the king
    CHECK_FALSE(black_in_check(make_board({kBK, 2, 2}, {kWP, 2, 1}, {kWR, 1, 3})));
    // downward diagonal neither
    CHECK_FALSE(black_in_check(make_board({kBK, 1, 1}, {kWP, 2, 2}, {kWR, 3, 3})));
}

TEST_CASE("sliders stop at the first intervening piece") {
    CHECK(black_in_check(make_board({kBK, 1, 1}, {kWQ, 1, 3}, {kWB, 3, 2})));
    // a knight wedged between queen and king blocks the file
    CHECK_FALSE(black_in_check(make_board({kBK, 1, 1}, {kWQ, 1, 3}, {kWN, 1, 2})));
}

TEST_CASE("labels follow check and mobility over the whole enumeration") {
    int counts[4] = {0, 0, 0, 0};
    for (const auto& b : enumerate_boards()) {
        const bool check = black_in_check(b);
        const int moves = count_legal_bk_moves(b);
        const ChessLabel lab = classify_board(b);
        if (kings_adjacent(b)) {
            CHECK(lab == ChessLabel::Illegal);
        } else if (check && moves > 0) {
            CHECK(lab == ChessLabel::Illegal);
        } else if (check) {
            CHECK(lab == ChessLabel::Mate);
        } else if (moves == 0) {
            CHECK(lab == ChessLabel::Draw);
        } else {
            CHECK(lab == ChessLabel::Safe);
        }
        counts[lab == ChessLabel::Illegal ? 3 : static_cast<int>(lab)]++;
    }
    CHECK(counts[0] + counts[1] + counts[2] + counts[3] == 7560);
    // every label actually occurs
    for (int c = 0; c < 4; ++c) CHECK(counts[c] > 0);
}

TEST_CASE("square space and assignment conversion round-trip") {
    const auto space = chess_space();
    REQUIRE(space.num_features() == 9);
    for (int f = 0; f < 9; ++f) {
        REQUIRE(space.domain_size(f) == 8);
        for (int v = 0; v < 8; ++v) CHECK(space.domains[f][v] == std::to_string(v));
    }
    for (const auto& b : enumerate_boards()) {
        const auto a = board_to_assignment(b);
        CHECK(space.contains(a));
        int occupied = 0;
        for (auto v : a.v) occupied += v != kEmpty;
        CHECK(occupied == 3);
        const auto back = assignment_to_board(a);
        CHECK(board_to_assignment(back) == a);
        CHECK(back.pieces[0].code == kBK);
    }
}

TEST_CASE("theory and feedback agree with the rules oracle") {
    const auto t = chess_theory();
    CHECK(t.classes == std::vector<std::string>{"safe", "draw", "mate"});
    const auto fb = build_chess_feedback();
    CHECK(fb.total() == 7560);
    CHECK(fb.labels.back() == t.bottom);
    for (const auto& b : enumerate_boards()) {
        const auto a = board_to_assignment(b);
        const ChessLabel lab = classify_board(b);
        const int expect = lab == ChessLabel::Illegal ? 3 : static_cast<int>(lab);
        CHECK(fb.find(a) == expect);
        CHECK(t.evaluate(a) == (lab == ChessLabel::Illegal ? kBottom : static_cast<int>(lab)));
    }
}

TEST_CASE("synthetic glyphs are jittered, bounded, and reproducible") {
    Rng r1(5), r2(5), r3(6);
    const auto a = synthetic_glyphs(r1, 4);
    const auto b = synthetic_glyphs(r2, 4);
    const auto c = synthetic_glyphs(r3, 4);
    for (int code = 0; code < 8; ++code) {
        REQUIRE(a.pools[code].size() == 4);
        for (const auto& img : a.pools[code]) {
            REQUIRE(img.size() == 784);
            for (float v : img) {
                CHECK(v >= 0.0f);
                CHECK(v <= 1.0f);
            }
        }
        CHECK(a.pools[code] == b.pools[code]);
        CHECK(a.pools[code] != c.pools[code]);
        CHECK(a.pools[code][0] != a.pools[code][1]);  // per-instance jitter
    }
}

TEST_CASE("board images place each square's glyph with y flipped and minmax scaling") {
    const auto fb = build_chess_feedback();
    Rng rng(9);
    const auto ds = generate_chess_dataset(12, flat_glyphs(), fb, rng);
    REQUIRE(ds.n == 12);
    CHECK(ds.h == 84);
    CHECK(ds.scaling == "minmax");
    for (int i = 0; i < ds.n; ++i) {
        const Assignment& a = ds.truth[i];
        float lo = 1.0f, hi = 0.0f;
        for (auto v : a.v) {
            lo = std::min(lo, v / 10.0f);
            hi = std::max(hi, v / 10.0f);
        }
        for (int s = 0; s < 9; ++s) {
            const float raw = a.v[s] / 10.0f;
            const float want = (raw - lo) / (hi - lo) - 0.5f;
            const int px = (s % 3) * 28, py = (2 - s / 3) * 28;
            const float* img = ds.item(i);
            for (int r = 0; r < 28; ++r)
                for (int q = 0; q < 28; ++q)
                    CHECK(img[(py + r) * 84 + px + q] == doctest::Approx(want).epsilon(1e-6));
        }
    }
}

TEST_CASE("chess datasets balance classes and agree with the feedback partition") {
    const auto fb = build_chess_feedback();
    Rng rng(4);
    Rng grng(7);
    const auto glyphs = synthetic_glyphs(grng, 8);
    const auto ds = generate_chess_dataset(91, glyphs, fb, rng);
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < ds.n; ++i) {
        counts[ds.label[i]]++;
        CHECK(fb.find(ds.truth[i]) == ds.label[i]);
        const float* img = ds.item(i);
        const auto [mn, mx] = std::minmax_element(img, img + ds.item_size());
        CHECK(*mn == doctest::Approx(-0.5f));
        CHECK(*mx == doctest::Approx(0.5f));
    }
    // 91 = 3 * 30 + 1; the remainder lands on the first class
    CHECK(counts[0] == 31);
    CHECK(counts[1] == 30);
    CHECK(counts[2] == 30);
    CHECK(ds.classes == std::vector<std::string>{"safe", "draw", "mate"});
}

TEST_CASE("piece corruption resamples fields to different admissible values") {
    const auto boards = enumerate_boards();
    Rng rng(13);
    const Board& b = boards[1234];

    const auto same = corrupt_pieces(b, 0.0, rng);
    CHECK(pieces_to_assignment(same) == board_to_assignment(b));

    for (int trial = 0; trial < 50; ++trial) {
        const auto flipped = corrupt_pieces(b, 1.0, rng);
        for (int p = 0; p < 3; ++p) {
            CHECK(flipped[p].code != b.pieces[p].code);
            CHECK(flipped[p].x != b.pieces[p].x);
            CHECK(flipped[p].y != b.pieces[p].y);
            CHECK(flipped[p].code >= 1);
            CHECK(flipped[p].code <= 7);
            CHECK(flipped[p].x >= 1);
            CHECK(flipped[p].x <= 3);
        }
    }
    CHECK_THROWS(corrupt_pieces(b, -0.1, rng));
}

TEST_CASE("collision squares keep the last piece written") {
    std::array<Piece, 3> ps = {Piece{kBK, 1, 1}, Piece{kWR, 1, 1}, Piece{kWQ, 2, 2}};
    const auto a = pieces_to_assignment(ps);
    CHECK(a.v[0] == kWR);  // rook overwrote the king on (1,1)
    CHECK(a.v[4] == kWQ);
    int occupied = 0;
    for (auto v : a.v) occupied += v != kEmpty;
    CHECK(occupied == 2);
}

TEST_CASE("idx ingestion maps digits to piece pools and drops eights and nines") {
    // tiny synthetic pair: 10 images labelled 0..9, pixel value = label
    const char* ipath = "idx_test_images.bin";
    const char* lpath = "idx_test_labels.bin";
    {
        std::ofstream im(ipath, std::ios::binary), lb(lpath, std::ios::binary);
        const auto be = [](uint32_t v) {
            return std::string{char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
        };
        im << be(2051) << be(10) << be(28) << be(28);
        lb << be(2049) << be(10);
        for (int i = 0; i < 10; ++i) {
            std::string px(784, static_cast<char>(i * 20));
            im << px;
            lb << static_cast<char>(i);
        }
    }
    const auto g = load_glyphs_idx(ipath, lpath);
    for (int code = 0; code < 8; ++code) {
        REQUIRE(g.pools[code].size() == 1);
        CHECK(g.pools[code][0][0] == doctest::Approx(code * 20 / 255.0f));
    }
    // bad magic is rejected
    {
        std::ofstream im(ipath, std::ios::binary);
        im << std::string(16, '\0');
    }
    CHECK_THROWS(load_glyphs_idx(ipath, lpath));
    std::remove(ipath);
    std::remove(lpath);
}
