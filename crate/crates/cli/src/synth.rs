//! Synthetic corpora with a known effect, for end-to-end checks of the
//! study design.
//!
//! Every repository has eight developers who each own one file. Each week
//! brings zero to three co-editing commits in which one developer rewrites
//! a few lines owned by another, drawn from a fixed set of ten directed
//! pairs. Treated repositories adopt a code-review bot at a random day; when
//! the effect is on, ten further pairs become active from that day, which
//! roughly doubles co-editing density.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, TimeZone, Utc};
use coedit_core::fixture::{Author, FastHistory};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::pipeline::study::repo_seed;

pub const DEVELOPERS: usize = 8;
const PAIRS_PER_SET: usize = 10;
const SEED_LINES: usize = 300;
const GROWTH_LINES: usize = 20;
const DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    pub seed: u64,
    pub treated: usize,
    pub controls: usize,
    /// Whether the extra pairs switch on at adoption.
    pub effect: bool,
    pub start: NaiveDate,
    pub weeks: usize,
    /// Range of adoption days after `start`, inclusive.
    pub adoption_days: (i64, i64),
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 1,
            treated: 8,
            controls: 4,
            effect: true,
            start: NaiveDate::from_ymd_opt(2019, 1, 7).expect("valid date"),
            weeks: 208,
            adoption_days: (600, 860),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub root: PathBuf,
    pub config: PathBuf,
    /// Repository names with their planted adoption time (treated only).
    pub repos: Vec<(String, Option<i64>)>,
}

struct Line {
    owner: usize,
    text: String,
}

struct Sim {
    rng: ChaCha8Rng,
    devs: Vec<Author>,
    files: Vec<Vec<Line>>,
    counter: usize,
    history: FastHistory,
}

fn file_name(dev: usize) -> String {
    format!("src/dev{dev}.txt")
}

const CI_PLAIN: &str = "name: ci\non: [push]\njobs:\n  test:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n      - run: make test\n";
const CI_BOT: &str = "name: ci\non: [push]\njobs:\n  test:\n    runs-on: ubuntu-latest\n    steps:\n      - uses: actions/checkout@v4\n      - run: make test\n      - uses: codecov/codecov-action@v4\n";

impl Sim {
    fn new(seed: u64) -> Self {
        let devs = (0..DEVELOPERS).map(|i| Author::new(&format!("Dev {i}"), &format!("dev{i}@synth.example"))).collect();
        Self { rng: ChaCha8Rng::seed_from_u64(seed), devs, files: (0..DEVELOPERS).map(|_| Vec::new()).collect(), counter: 0, history: FastHistory::new() }
    }

    fn body(&self, f: usize) -> Vec<u8> {
        let mut s = String::new();
        for l in &self.files[f] {
            s.push_str(&l.text);
            s.push('\n');
        }
        s.into_bytes()
    }

    fn commit_file(&mut self, who: usize, time: i64, msg: &str, f: usize) {
        let body = self.body(f);
        let name = file_name(f);
        let author = self.devs[who].clone();
        self.history.commit(&author, time, msg, &[(name.as_str(), &body)], &[]);
    }

    fn grow(&mut self, dev: usize, n: usize, time: i64) {
        for _ in 0..n {
            self.counter += 1;
            let text = format!("d{dev} line {}", self.counter);
            self.files[dev].push(Line { owner: dev, text });
        }
        self.commit_file(dev, time, "extend", dev);
    }

    /// `a` rewrites up to three consecutive lines `b` still owns.
    fn coedit(&mut self, a: usize, b: usize, time: i64) {
        let owned: Vec<usize> = self.files[b].iter().enumerate().filter(|(_, l)| l.owner == b).map(|(i, _)| i).collect();
        if owned.is_empty() {
            return;
        }
        let start = self.rng.gen_range(0..owned.len());
        let take = self.rng.gen_range(1..=3usize);
        for &i in owned.iter().skip(start).take(take) {
            self.counter += 1;
            self.files[b][i] = Line { owner: a, text: format!("d{a} edit {}", self.counter) };
        }
        self.commit_file(a, time, "rework", b);
    }
}

fn distinct_pairs(rng: &mut ChaCha8Rng) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let mut all: Vec<(usize, usize)> =
        (0..DEVELOPERS).flat_map(|a| (0..DEVELOPERS).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    all.shuffle(rng);
    (all[..PAIRS_PER_SET].to_vec(), all[PAIRS_PER_SET..2 * PAIRS_PER_SET].to_vec())
}

/// Builds one repository; returns the last commit time.
fn build_repo(dir: &Path, seed: u64, spec: &SynthSpec, adoption: i64, bot: bool) -> std::io::Result<(i64, usize)> {
    let t0 = Utc.from_utc_datetime(&spec.start.and_hms_opt(0, 0, 0).expect("midnight")).timestamp();
    let mut sim = Sim::new(seed);
    let (base, extra) = distinct_pairs(&mut sim.rng);
    for d in 0..DEVELOPERS {
        sim.grow(d, SEED_LINES, t0 + d as i64 * 3600);
    }
    let t_adopt = t0 + adoption * DAY;
    let mut adopted = false;
    let mut last = t0;
    for w in 0..spec.weeks {
        let week = t0 + (w as i64 * 7 + 1) * DAY;
        let mut events: Vec<(i64, Option<(usize, usize)>, usize)> = Vec::new();
        let grower = w % DEVELOPERS;
        events.push((week + sim.rng.gen_range(0..6 * DAY), None, grower));
        let n = sim.rng.gen_range(0..=3usize);
        for _ in 0..n {
            let t = week + sim.rng.gen_range(0..6 * DAY);
            let active = if spec.effect && bot && t >= t_adopt { 2 * PAIRS_PER_SET } else { PAIRS_PER_SET };
            let k = sim.rng.gen_range(0..active);
            let pair = if k < PAIRS_PER_SET { base[k] } else { extra[k - PAIRS_PER_SET] };
            events.push((t, Some(pair), 0));
        }
        events.sort_by_key(|e| e.0);
        for (t, pair, grower) in events {
            if !adopted && t >= t_adopt {
                adopted = true;
                let who = sim.rng.gen_range(0..DEVELOPERS);
                let author = sim.devs[who].clone();
                let ci = if bot { CI_BOT } else { CI_PLAIN };
                sim.history.commit(&author, t_adopt, "ci", &[(".github/workflows/ci.yml", ci.as_bytes())], &[]);
            }
            match pair {
                Some((a, b)) => sim.coedit(a, b, t),
                None => sim.grow(grower, GROWTH_LINES, t),
            }
            last = last.max(t);
        }
    }
    sim.history.write(dir)?;
    Ok((last, sim.history.commit_count()))
}

/// Writes repositories, `repos.csv`, `profiles.csv` and `study.toml` below
/// `root`.
pub fn generate(root: &Path, spec: &SynthSpec) -> std::io::Result<SynthCorpus> {
    std::fs::create_dir_all(root)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut repos = Vec::new();
    let mut list = String::from("full_name,path\n");
    let mut profiles = String::from("full_name,language,stars,contributors,commits,pull_requests,is_fork,created_at,last_commit_at\n");
    let start = spec.start.format("%Y-%m-%dT00:00:00Z").to_string();
    let names = (0..spec.treated).map(|i| (format!("synth/treated-{i:02}"), true)).chain((0..spec.controls).map(|i| (format!("synth/control-{i:02}"), false)));
    for (name, bot) in names {
        let adoption = rng.gen_range(spec.adoption_days.0..=spec.adoption_days.1);
        let rel = format!("repos/{}", name.replace('/', "_"));
        let (last, commits) = build_repo(&root.join(&rel), repo_seed(spec.seed, &name), spec, adoption, bot)?;
        let last = Utc.timestamp_opt(last, 0).single().expect("valid time").format("%Y-%m-%dT%H:%M:%SZ");
        let _ = writeln!(list, "{name},{rel}");
        let _ = writeln!(
            profiles,
            "{name},Rust,{},{DEVELOPERS},{commits},{},false,{start},{last}",
            100 + rng.gen_range(0..400),
            90 + rng.gen_range(0..=20)
        );
        repos.push((name, bot.then_some(adoption)));
    }
    std::fs::write(root.join("repos.csv"), list)?;
    std::fs::write(root.join("profiles.csv"), profiles)?;
    let config = root.join("study.toml");
    std::fs::write(
        &config,
        format!(
            "[input]\nrepos = \"repos.csv\"\nprofiles = \"profiles.csv\"\n\n[output]\ndir = \"out\"\n\n[study]\nseed = {}\nplacebo_k = 20\n\n[run]\njobs = 0\n",
            spec.seed
        ),
    )?;
    Ok(SynthCorpus { root: root.to_path_buf(), config, repos })
}
