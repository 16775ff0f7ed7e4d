use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};

use super::StudyError;

/// Repository metadata used for selection and matching.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoProfile {
    pub full_name: String,
    #[serde(alias = "language")]
    pub primary_language: String,
    pub stars: u64,
    pub contributors: u64,
    pub commits: u64,
    #[serde(default)]
    pub pull_requests: u64,
    #[serde(deserialize_with = "flexible_bool")]
    pub is_fork: bool,
    #[serde(deserialize_with = "flexible_time")]
    pub created_at: DateTime<Utc>,
    #[serde(deserialize_with = "flexible_time")]
    pub last_commit_at: DateTime<Utc>,
}

impl RepoProfile {
    pub fn age_days(&self) -> f64 {
        (self.last_commit_at - self.created_at).num_seconds() as f64 / 86_400.0
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        if self.full_name.is_empty() {
            return Err(StudyError::InvalidProfile { repo: String::new(), detail: "empty name".into() });
        }
        if self.last_commit_at < self.created_at {
            return Err(StudyError::InvalidProfile {
                repo: self.full_name.clone(),
                detail: "last commit precedes creation".into(),
            });
        }
        Ok(())
    }
}

/// Accepts RFC 3339, `YYYY-MM-DD HH:MM:SS`, `YYYY-MM-DDTHH:MM:SS` (UTC) and
/// plain dates.
pub fn parse_time(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").ok().map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
}

fn flexible_time<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
    let s = String::deserialize(d)?;
    parse_time(&s).ok_or_else(|| serde::de::Error::custom(format!("unrecognized timestamp `{s}`")))
}

fn flexible_bool<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum B {
        B(bool),
        S(String),
    }
    match B::deserialize(d)? {
        B::B(b) => Ok(b),
        B::S(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" | "" => Ok(false),
            other => Err(serde::de::Error::custom(format!("not a boolean: `{other}`"))),
        },
    }
}

/// Reads a repository list export (`full_name, language, stars,
/// contributors, commits, is_fork, created_at, last_commit_at,
/// pull_requests`; extra columns ignored).
pub fn read_profiles_csv<R: std::io::Read>(reader: R) -> Result<Vec<RepoProfile>, StudyError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize::<RepoProfile>() {
        let p = row.map_err(|e| StudyError::Csv(e.to_string()))?;
        p.validate()?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_export() {
        let text = "full_name,language,stars,contributors,commits,is_fork,created_at,last_commit_at,pull_requests,extra\n\
                    acme/widgets,Rust,42,7,310,false,2019-02-03T04:05:06Z,2023-01-01,12,x\n\
                    acme/fork,Go,500,3,40,True,2020-01-01 00:00:00,2022-06-01T00:00:00,0,y\n";
        let p = read_profiles_csv(text.as_bytes()).unwrap();
        assert_eq!(p[0].stars, 42);
        assert_eq!(p[0].primary_language, "Rust");
        assert!(p[1].is_fork);
        assert_eq!(p[1].created_at.to_rfc3339(), "2020-01-01T00:00:00+00:00");
    }

    #[test]
    fn rejects_inverted_dates() {
        let text = "full_name,language,stars,contributors,commits,is_fork,created_at,last_commit_at,pull_requests\n\
                    a/b,C,1,1,1,false,2023-01-01,2020-01-01,0\n";
        assert!(matches!(read_profiles_csv(text.as_bytes()), Err(StudyError::InvalidProfile { .. })));
        assert!(read_profiles_csv("full_name\nx\n".as_bytes()).is_err());
    }
}
