mod common;

use amt_eval::ingest::{parse_notes_text, parse_smf, write_notes_text};
use amt_eval::model::{apply_sustain, frame_count, NoteList, PedalEvent, PedalMode, PianoRoll, Role};
use amt_eval::Error;
use common::{dense, random_notes, roll_oracle};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn rolls_match_cell_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let count = rng.gen_range(0..20);
        let notes = random_notes(&mut rng, count, 300, 0.007, 21..=108, false);
        let list = NoteList::new(notes.clone(), vec![], Role::Output).unwrap();
        let frames = frame_count(list.duration());
        let roll = PianoRoll::from_notes(&list, PedalMode::WithoutPedal, list.duration());
        assert_eq!(roll.frames(), frames);
        assert_eq!(dense(&roll), roll_oracle(&notes, frames));
    }
}

#[test]
fn frame_count_covers_duration() {
    for ms in 0..3000u32 {
        let d = f64::from(ms) / 1000.0;
        let t = frame_count(d);
        assert!(t as f64 / 100.0 >= d - 1e-12);
        assert!(t == 0 || (t - 1) as f64 / 100.0 < d);
    }
}

#[test]
fn text_fuzz_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let alphabet: Vec<char> = "0123456789 .,-+eE#\tabcxyzNaninf".chars().collect();
    let mut ok = 0;
    for _ in 0..10_000 {
        let len = rng.gen_range(0..24);
        let line: String = (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect();
        for role in [Role::Target, Role::Output] {
            match parse_notes_text(&line, role) {
                Ok(_) => ok += 1,
                Err(Error::Text { line: 1, .. }) => {}
                Err(other) => panic!("`{line}` gave an error without a line number: {other:?}"),
            }
        }
    }
    assert!(ok > 0);
}

#[test]
fn smf_fuzz_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let base = b"MThd\0\0\0\x06\0\0\0\x01\0\x60MTrk\0\0\0\x0c\0\x90\x3c\x40\x60\x80\x3c\0\0\xff\x2f\0".to_vec();
    assert!(parse_smf(&base, Role::Target).is_ok());
    for _ in 0..5000 {
        let mut bytes = base.clone();
        for _ in 0..rng.gen_range(1..4) {
            let i = rng.gen_range(0..bytes.len());
            bytes[i] = rng.gen();
        }
        if rng.gen_bool(0.2) {
            bytes.truncate(rng.gen_range(0..bytes.len()));
        }
        match parse_smf(&bytes, Role::Target) {
            Ok(_) => {}
            Err(e) => assert!(
                e.is_parse_error() || matches!(e, Error::InvalidNote(_) | Error::PitchOutOfRange(_)),
                "{e:?}"
            ),
        }
    }
}

fn arb_list() -> impl Strategy<Value = NoteList> {
    (
        prop::collection::vec((0u32..200, 1u32..100, 50i64..56), 0..12),
        prop::collection::vec((0u32..300, 0u8..128), 0..8),
    )
        .prop_map(|(notes, mut pedal)| {
            let notes = notes
                .into_iter()
                .map(|(s, len, p)| common::note(f64::from(s) * 0.01, f64::from(s + len) * 0.01, p, Some(64)))
                .collect();
            pedal.sort();
            let pedal = pedal
                .into_iter()
                .map(|(t, value)| PedalEvent {
                    time: f64::from(t) * 0.01,
                    value,
                })
                .collect();
            NoteList::new(notes, pedal, Role::Target).unwrap()
        })
}

proptest! {
    #[test]
    fn sustain_only_extends_and_never_overlaps_repeats(list in arb_list()) {
        let sustained = apply_sustain(&list);
        prop_assert_eq!(sustained.len(), list.len());
        for (raw, ext) in list.notes().iter().zip(sustained.notes()) {
            prop_assert_eq!(raw.onset(), ext.onset());
            prop_assert_eq!(raw.pitch(), ext.pitch());
            prop_assert!(ext.offset() >= raw.offset());
            for other in list.notes() {
                if other.pitch() == raw.pitch() && other.onset() > raw.onset() {
                    prop_assert!(ext.offset() <= other.onset().max(raw.offset()));
                }
            }
        }
    }

    #[test]
    fn active_cells_map_back_to_notes(list in arb_list()) {
        for mode in [PedalMode::WithPedal, PedalMode::WithoutPedal] {
            let sounding = list.sounding(mode);
            let roll = PianoRoll::from_notes(&list, mode, sounding.duration());
            for r in 0..88 {
                for t in 0..roll.frames() {
                    if roll.get(r, t) {
                        let time = t as f64 / 100.0;
                        prop_assert!(sounding.notes().iter().any(|n| n.row() == r && n.onset() <= time && time < n.offset()));
                    }
                }
            }
        }
    }

    #[test]
    fn text_round_trip(list in arb_list()) {
        let text = write_notes_text(&list);
        let parsed = parse_notes_text(&text, Role::Target).unwrap();
        prop_assert_eq!(parsed.notes(), list.notes());
    }
}
