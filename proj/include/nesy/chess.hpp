#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nesy/dataset.hpp"
#include "nesy/logic.hpp"
#include "nesy/rng.hpp"

namespace nesy {

// square codes; 1..7 are piece identities, 0 marks an empty square
enum : int { kEmpty = 0, kBK = 1, kWR = 2, kWB = 3, kWN = 4, kWK = 5, kWP = 6, kWQ = 7 };

struct Piece {
    int code;  // kBK..kWQ
    int x, y;  // columns/rows 1..3, row 1 at the bottom
};

// Exactly one black king (kept at pieces[0]) plus two white pieces with
// distinct codes on distinct squares.
struct Board {
    std::array<Piece, 3> pieces;
};

// labels, in theory class order
enum class ChessLabel { Safe = 0, Draw = 1, Mate = 2, Illegal = -1 };

// all legal piece placements: 9 BK squares x C(8,2) square pairs x 6*5
// ordered white code pairs = 7560, deterministic order, duplicate-free
std::vector<Board> enumerate_boards();

// Rules oracle, black to move. Kings adjacent is illegal; check with an
// escape square is also illegal so that safe/draw/mate stay exclusive.
// White pawns attack diagonally toward increasing y; sliders are blocked
// by intervening pieces.
ChessLabel classify_board(const Board& b);

// exposed for property tests over the full enumeration
bool black_in_check(const Board& b);
int count_legal_bk_moves(const Board& b);

// squares (1,1),(2,1),(3,1),(1,2),...,(3,3); values are code digits "0".."7"
FeatureSpace chess_space();
// maps each square to its piece code (empty squares to 0)
Assignment board_to_assignment(const Board& b);
Board assignment_to_board(const Assignment& a);

// DNF theory whose conjuncts are the safe/draw/mate board assignments;
// illegal boards fall through to bottom
Theory chess_theory();
// groups all 7560 board assignments by oracle label
FeedbackSet build_chess_feedback();

// per code 0..7, a pool of 28x28 grayscale glyph images in [0,1]
struct GlyphSource {
    std::array<std::vector<std::vector<float>>, 8> pools;
};

// procedurally rendered glyph families (ring, disk, bars, ...), jittered
// per instance; deterministic given rng
GlyphSource synthetic_glyphs(Rng& rng, int per_code = 64);

// IDX ingestion (big-endian headers, magic 2051/2049); digits 0..7 feed the
// piece pools via the code mapping, 8 and 9 are dropped
GlyphSource load_glyphs_idx(const std::string& images_path, const std::string& labels_path);

// n instances, classes drawn with equal frequency, boards uniform within
// class; image = 3x3 glyph grid, 84x84, MinMax-scaled to [-0.5, 0.5]
Dataset generate_chess_dataset(int n, const GlyphSource& glyphs, const FeedbackSet& fb, Rng& rng);

// Independently for each piece, each of code/x/y is resampled with
// probability alpha, uniformly over the other admissible values. The result
// may violate Board invariants; that is intended.
std::array<Piece, 3> corrupt_pieces(const Board& b, double alpha, Rng& rng);

// 9-square label from a possibly-invalid piece list; on square collisions
// later pieces overwrite earlier ones
Assignment pieces_to_assignment(const std::array<Piece, 3>& pieces);

}  // namespace nesy
