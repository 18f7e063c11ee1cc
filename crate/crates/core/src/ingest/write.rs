use std::io::Write;

use csv::WriterBuilder;

use super::{Cohort, IngestError, SCORES_HEADER, TEAM_LIST_HEADER};

/// Writes the team list table. Members are not part of this table; they are
/// recovered from the score table and the leader column on re-ingest.
pub fn write_team_list<W: Write>(
    out: W,
    cohort: &Cohort,
    delimiter: u8,
) -> Result<(), IngestError> {
    let mut w = WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(TEAM_LIST_HEADER)?;
    for t in cohort.teams() {
        let course = &cohort.activities()[t.activity_ordinal as usize - 1].label;
        let score = t.team_score.map(|s| s.to_string()).unwrap_or_default();
        let leader = t.leader.as_ref().map(|l| l.as_str()).unwrap_or("");
        w.write_record([
            t.team_id.as_str(),
            &t.grade,
            &t.class,
            course,
            &score,
            leader,
            t.topic.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_scores<W: Write>(out: W, cohort: &Cohort, delimiter: u8) -> Result<(), IngestError> {
    let mut w = WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(SCORES_HEADER)?;
    for rec in cohort.scores() {
        w.write_record([
            rec.team_id.as_str(),
            rec.student.as_str(),
            &rec.score.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One course label per line, in activity order.
pub fn write_course_order<W: Write>(mut out: W, cohort: &Cohort) -> std::io::Result<()> {
    for a in cohort.activities() {
        writeln!(out, "{}", a.label)?;
    }
    Ok(())
}
