#pragma once

#include <algorithm>
#include <istream>
#include <ostream>
#include <vector>

#include "lobsim/book.hpp"
#include "lobsim/csv.hpp"

namespace lobsim {

inline constexpr std::string_view kSnapshotHeader = "level,side,px,qty,entry_seq";

// One row per resting order: level counts from 1 at the touch, entry_seq is
// the order's priority stamp (its id in a simulated book).
inline void write_snapshot_csv(std::ostream& out, const BookState& book) {
  out << kSnapshotHeader << '\n';
  for (Side s : {Side::Ask, Side::Bid}) {
    int level = 0;
    book.for_each_level(s, [&](Price px, const BookState::Queue& q) {
      ++level;
      for (const auto& o : q) out << level << ',' << to_string(s) << ',' << px << ',' << o.qty << ',' << o.id << '\n';
    });
  }
}

struct SnapshotRow {
  int level = 0;
  Side side = Side::Ask;
  Price px = 0;
  Qty qty = 0;
  std::uint64_t entry_seq = 0;
};

inline std::vector<SnapshotRow> read_snapshot_rows(std::istream& in) {
  std::vector<SnapshotRow> rows;
  csv::read(in, kSnapshotHeader, [&](const std::vector<std::string>& f, std::size_t line) {
    if (f.size() != 5) throw Error(Errc::ParseError, csv::where(line) + "expected 5 fields");
    SnapshotRow r;
    r.level = static_cast<int>(csv::to_int(f[0], line));
    try {
      r.side = parse_side(f[1]);
    } catch (const Error& e) {
      throw Error(Errc::ParseError, csv::where(line) + e.what());
    }
    r.px = csv::to_int(f[2], line);
    r.qty = csv::to_int(f[3], line);
    const auto seq = csv::to_int(f[4], line);
    if (r.px <= 0 || r.qty <= 0 || seq <= 0)
      throw Error(Errc::ParseError, csv::where(line) + "px, qty and entry_seq must be positive");
    r.entry_seq = static_cast<std::uint64_t>(seq);
    rows.push_back(r);
  });
  return rows;
}

// Rebuilds the book with ids equal to entry_seq, inserted in entry_seq order
// so that time priority within each level is preserved.
inline BookState book_from_snapshot(std::vector<SnapshotRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.entry_seq < b.entry_seq; });
  BookState book;
  for (const auto& r : rows) {
    const SubmitResult res = book.submit(Order::limit(r.entry_seq, r.side, r.px, r.qty));
    if (!res.fills.empty()) throw Error(Errc::ParseError, "snapshot is crossed at price " + std::to_string(r.px));
  }
  return book;
}

inline BookState read_snapshot_csv(std::istream& in) { return book_from_snapshot(read_snapshot_rows(in)); }

}  // namespace lobsim
