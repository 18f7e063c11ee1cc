use std::collections::BTreeSet;
use std::io::Read;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{
    Activity, Diagnostic, IndividualScoreRecord, IngestError, StudentId, TeamRecord, SCORES_HEADER,
    TEAM_LIST_HEADER,
};

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub delimiter: u8,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self { delimiter: b',' }
    }
}

/// Parsed team list rows plus soft findings.
#[derive(Debug, Clone, Default)]
pub struct TeamList {
    pub teams: Vec<TeamRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

struct Table<R: Read> {
    reader: csv::Reader<R>,
    width: usize,
}

impl<R: Read> Table<R> {
    fn open(input: R, opts: &ParseOptions, header: &[&str]) -> Result<Self, IngestError> {
        let mut reader = ReaderBuilder::new()
            .delimiter(opts.delimiter)
            .has_headers(false)
            .flexible(true)
            .trim(Trim::All)
            .from_reader(input);
        let mut first = StringRecord::new();
        if !reader.read_record(&mut first)? {
            return Err(IngestError::MissingHeader);
        }
        let found: Vec<&str> = first
            .iter()
            .enumerate()
            .map(|(k, f)| {
                if k == 0 {
                    f.trim_start_matches('\u{feff}')
                } else {
                    f
                }
            })
            .collect();
        if found != header {
            return Err(IngestError::BadHeader {
                expected: header.join(","),
                found: found.join(","),
            });
        }
        Ok(Self {
            reader,
            width: header.len(),
        })
    }

    /// Next data row with its 1-based line number.
    fn next_row(&mut self) -> Result<Option<(u64, StringRecord)>, IngestError> {
        let mut rec = StringRecord::new();
        if !self.reader.read_record(&mut rec)? {
            return Ok(None);
        }
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != self.width {
            return Err(IngestError::ColumnCount {
                line,
                expected: self.width,
                found: rec.len(),
            });
        }
        Ok(Some((line, rec)))
    }
}

fn score_field(line: u64, column: &'static str, raw: &str) -> Result<f64, IngestError> {
    let value: f64 = raw.parse().map_err(|_| IngestError::InvalidNumber {
        line,
        column,
        value: raw.to_string(),
    })?;
    if !(0.0..=100.0).contains(&value) {
        return Err(IngestError::ScoreOutOfRange {
            line,
            column,
            value,
        });
    }
    Ok(value)
}

fn required<'a>(line: u64, column: &'static str, raw: &'a str) -> Result<&'a str, IngestError> {
    if raw.is_empty() {
        Err(IngestError::EmptyField { line, column })
    } else {
        Ok(raw)
    }
}

/// Parses a `ID,Grade,Class,Course,Score,LeaderNo,Topic` table.
///
/// `Course` is resolved against `activities` by label. Member sets are left
/// empty; [`super::build_cohort`] fills them from the score table.
pub fn parse_team_list<R: Read>(
    input: R,
    activities: &[Activity],
    opts: &ParseOptions,
) -> Result<TeamList, IngestError> {
    let mut table = Table::open(input, opts, &TEAM_LIST_HEADER)?;
    let mut out = TeamList::default();
    while let Some((line, row)) = table.next_row()? {
        let team_id = required(line, "ID", &row[0])?.to_string();
        let course = &row[3];
        let activity = activities
            .iter()
            .find(|a| a.label == course)
            .ok_or_else(|| IngestError::UnknownCourse {
                line,
                course: course.to_string(),
            })?;
        let team_score = match &row[4] {
            "" => {
                out.diagnostics.push(Diagnostic::info(
                    Some(line),
                    Some(&team_id),
                    "no team score".to_string(),
                ));
                None
            }
            raw => Some(score_field(line, "Score", raw)?),
        };
        let leader = match &row[5] {
            "" => None,
            raw => Some(StudentId::new(raw)?),
        };
        let topic = match &row[6] {
            "" => None,
            raw => Some(raw.to_string()),
        };
        out.teams.push(TeamRecord {
            team_id,
            activity_ordinal: activity.ordinal,
            grade: row[1].to_string(),
            class: row[2].to_string(),
            members: BTreeSet::new(),
            team_score,
            topic,
            leader,
        });
    }
    Ok(out)
}

/// Parses a `TeamID,StudentNo,Score` table.
pub fn parse_scores<R: Read>(
    input: R,
    opts: &ParseOptions,
) -> Result<Vec<IndividualScoreRecord>, IngestError> {
    let mut table = Table::open(input, opts, &SCORES_HEADER)?;
    let mut out = Vec::new();
    while let Some((line, row)) = table.next_row()? {
        let team_id = required(line, "TeamID", &row[0])?.to_string();
        let student = StudentId::new(required(line, "StudentNo", &row[1])?)?;
        let score = score_field(line, "Score", required(line, "Score", &row[2])?)?;
        out.push(IndividualScoreRecord {
            team_id,
            student,
            score,
        });
    }
    Ok(out)
}
