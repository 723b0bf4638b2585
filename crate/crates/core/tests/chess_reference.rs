//! Move application checked against positions produced by an independent
//! chess implementation (frozen in `data/reference_moves.tsv`).

use movesense_core::chess::{apply_move, parse_fen, parse_san, san_to_engine_coords, BoardState, ChessError, Role};

struct Case {
    before: String,
    san: String,
    uci: String,
    after: String,
}

fn cases() -> Vec<Case> {
    include_str!("data/reference_moves.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            assert_eq!(cols.len(), 4, "bad fixture line {l}");
            Case {
                before: cols[0].into(),
                san: cols[1].into(),
                uci: cols[2].into(),
                after: cols[3].into(),
            }
        })
        .collect()
}

#[test]
fn matches_reference_positions() {
    let cases = cases();
    assert!(cases.len() > 800);
    for case in &cases {
        let board = parse_fen(&case.before).unwrap();
        let mv = parse_san(&case.san).unwrap();
        let next = apply_move(&board, &mv).unwrap_or_else(|e| panic!("{} on {}: {e}", case.san, case.before));
        assert_eq!(next.to_fen(), case.after, "{} on {}", case.san, case.before);
        assert_eq!(san_to_engine_coords(&board, &mv).unwrap(), case.uci);
    }
}

#[test]
fn fen_round_trip_on_reference_positions() {
    for case in cases() {
        for fen in [&case.before, &case.after] {
            assert_eq!(&parse_fen(fen).unwrap().to_fen(), fen);
        }
    }
}

#[test]
fn apply_move_invariants() {
    for case in cases() {
        let board = parse_fen(&case.before).unwrap();
        let next = apply_move(&board, &parse_san(&case.san).unwrap()).unwrap();
        assert_ne!(next.turn, board.turn);
        assert!(next.piece_count() <= board.piece_count());
        for color in [movesense_core::chess::Color::White, movesense_core::chess::Color::Black] {
            let kings = next
                .pieces()
                .filter(|(_, p)| p.role == Role::King && p.color == color)
                .count();
            assert_eq!(kings, 1);
        }
    }
}

#[test]
fn e4_from_start_sets_en_passant() {
    let next = apply_move(&BoardState::starting(), &parse_san("e4").unwrap()).unwrap();
    assert_eq!(next.to_fen(), "rnbqkbnr/pppppppp/8/8/4P3/8/PPPP1PPP/RNBQKBNR b KQkq e3 0 1");
}

#[test]
fn rook_disambiguation_by_file() {
    let board = parse_fen("4k3/8/8/8/8/8/4K3/R6R w - - 0 1").unwrap();
    assert_eq!(san_to_engine_coords(&board, &parse_san("Rad1").unwrap()).unwrap(), "a1d1");
    assert_eq!(san_to_engine_coords(&board, &parse_san("Rhd1").unwrap()).unwrap(), "h1d1");
    assert!(matches!(
        san_to_engine_coords(&board, &parse_san("Rd1").unwrap()),
        Err(ChessError::IllegalMove { .. })
    ));
}

#[test]
fn pinned_knight_needs_no_disambiguator() {
    // Knight on c3 is pinned by the bishop on b4, so Ne2 can only be the g1 knight.
    let board = parse_fen("4k3/8/8/8/1b6/2N5/8/4K1N1 w - - 0 1").unwrap();
    assert_eq!(san_to_engine_coords(&board, &parse_san("Ne2").unwrap()).unwrap(), "g1e2");
}
