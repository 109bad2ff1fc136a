//! CSV formats for match logs (one row per segment) and the player table.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::segment::{Corpus, PlayerInfo, SegmentRecord};
use crate::RatingError;

pub const SEGMENT_COLUMNS: [&str; 15] = [
    "match_id",
    "date",
    "competition",
    "home_team",
    "away_team",
    "segment",
    "duration",
    "home_players",
    "away_players",
    "home_goals",
    "away_goals",
    "start_diff",
    "home_reds",
    "away_reds",
    "home_advantage",
];

pub const PLAYER_COLUMNS: [&str; 4] = ["id", "name", "birth_date", "leagues"];

/// Separator inside list-valued cells.
const LIST_SEP: char = ';';

#[derive(Serialize, Deserialize)]
struct SegmentRow {
    match_id: String,
    date: NaiveDate,
    competition: String,
    home_team: String,
    away_team: String,
    segment: u32,
    duration: f64,
    home_players: String,
    away_players: String,
    home_goals: u32,
    away_goals: u32,
    start_diff: i32,
    home_reds: u32,
    away_reds: u32,
    home_advantage: u8,
}

#[derive(Serialize, Deserialize)]
struct PlayerRow {
    id: String,
    name: String,
    birth_date: NaiveDate,
    leagues: String,
}

fn split_list(s: &str) -> Vec<String> {
    s.split(LIST_SEP).map(str::trim).filter(|p| !p.is_empty()).map(str::to_string).collect()
}

fn csv_error(label: &str, e: csv::Error) -> RatingError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        _ => e.to_string(),
    };
    RatingError::Csv {
        path: label.to_string(),
        line,
        message,
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str], label: &str) -> Result<(), RatingError> {
    let header = rdr.headers().map_err(|e| csv_error(label, e))?;
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(RatingError::Csv {
            path: label.to_string(),
            line: 1,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

pub fn parse_segments<R: Read>(reader: R, label: &str) -> Result<Vec<SegmentRecord>, RatingError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(&mut rdr, &SEGMENT_COLUMNS, label)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<SegmentRow>() {
        let row = row.map_err(|e| csv_error(label, e))?;
        let line = out.len() as u64 + 2;
        if row.home_advantage > 1 {
            return Err(RatingError::Csv {
                path: label.to_string(),
                line,
                message: "home_advantage must be 0 or 1".into(),
            });
        }
        let seg = SegmentRecord {
            match_id: row.match_id,
            date: row.date,
            competition: row.competition,
            home_team: row.home_team,
            away_team: row.away_team,
            segment: row.segment,
            duration: row.duration,
            home_players: split_list(&row.home_players),
            away_players: split_list(&row.away_players),
            home_goals: row.home_goals,
            away_goals: row.away_goals,
            start_diff: row.start_diff,
            home_reds: row.home_reds,
            away_reds: row.away_reds,
            home_advantage: row.home_advantage == 1,
        };
        seg.check().map_err(|e| RatingError::Csv {
            path: label.to_string(),
            line,
            message: e.to_string(),
        })?;
        out.push(seg);
    }
    Ok(out)
}

pub fn parse_players<R: Read>(reader: R, label: &str) -> Result<Vec<PlayerInfo>, RatingError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    check_header(&mut rdr, &PLAYER_COLUMNS, label)?;
    let mut out: Vec<PlayerInfo> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for row in rdr.deserialize::<PlayerRow>() {
        let row = row.map_err(|e| csv_error(label, e))?;
        if !seen.insert(row.id.clone()) {
            return Err(RatingError::Csv {
                path: label.to_string(),
                line: out.len() as u64 + 2,
                message: format!("duplicate player id `{}`", row.id),
            });
        }
        out.push(PlayerInfo {
            id: row.id,
            name: row.name,
            birth: row.birth_date,
            leagues: split_list(&row.leagues),
        });
    }
    Ok(out)
}

pub fn write_segments<W: Write>(writer: W, segments: &[SegmentRecord]) -> Result<(), RatingError> {
    let mut w = csv::Writer::from_writer(writer);
    for s in segments {
        w.serialize(SegmentRow {
            match_id: s.match_id.clone(),
            date: s.date,
            competition: s.competition.clone(),
            home_team: s.home_team.clone(),
            away_team: s.away_team.clone(),
            segment: s.segment,
            duration: s.duration,
            home_players: s.home_players.join(";"),
            away_players: s.away_players.join(";"),
            home_goals: s.home_goals,
            away_goals: s.away_goals,
            start_diff: s.start_diff,
            home_reds: s.home_reds,
            away_reds: s.away_reds,
            home_advantage: u8::from(s.home_advantage),
        })
        .map_err(|e| csv_error("<output>", e))?;
    }
    if segments.is_empty() {
        w.write_record(SEGMENT_COLUMNS).map_err(|e| csv_error("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_players<W: Write>(writer: W, players: &[PlayerInfo]) -> Result<(), RatingError> {
    let mut w = csv::Writer::from_writer(writer);
    for p in players {
        w.serialize(PlayerRow {
            id: p.id.clone(),
            name: p.name.clone(),
            birth_date: p.birth,
            leagues: p.leagues.join(";"),
        })
        .map_err(|e| csv_error("<output>", e))?;
    }
    if players.is_empty() {
        w.write_record(PLAYER_COLUMNS).map_err(|e| csv_error("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus(matches: &Path, players: &Path) -> Result<Corpus, RatingError> {
    Ok(Corpus {
        segments: parse_segments(File::open(matches)?, &matches.display().to_string())?,
        players: parse_players(File::open(players)?, &players.display().to_string())?,
    })
}

pub fn write_corpus(corpus: &Corpus, matches: &Path, players: &Path) -> Result<(), RatingError> {
    write_segments(File::create(matches)?, &corpus.segments)?;
    write_players(File::create(players)?, &corpus.players)?;
    Ok(())
}
