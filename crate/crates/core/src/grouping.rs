//! Role assignment and the four conversation groups.
//!
//! Roles 1–4 belong to Justices and are keyed on (vote, addressed side);
//! roles 5–6 belong to lawyers by side. Roles combine into cooperation
//! groups I.i = {1, 5}, I.ii = {3, 5}, II.i = {2, 6}, II.ii = {4, 6}. Crossed
//! with the lawsuit outcome, these give the κ pools:
//!
//! | κ | cooperation | outcome | gathered from            |
//! |---|-------------|---------|--------------------------|
//! | A | supportive  | win     | I.i of Pe + II.ii of Re  |
//! | B | supportive  | lose    | I.i of Re + II.ii of Pe  |
//! | C | unsupported | win     | I.ii of Pe + II.i of Re  |
//! | D | unsupported | lose    | I.ii of Re + II.i of Pe  |
//!
//! Pe/Re name the lawsuits won by the petitioner/respondent. A lawyer turn
//! sits in both groups of its role, so it lands in two pools: A and C when
//! that lawyer's side wins, B and D when it loses.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{CaseMeta, Corpus, Side, Speaker, UttRef, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleId(u8);

impl RoleId {
    pub fn new(value: u8) -> Option<RoleId> {
        (1..=6).contains(&value).then_some(RoleId(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn is_justice(self) -> bool {
        self.0 <= 4
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cooperation {
    Supportive,
    Unsupported,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    Win,
    Lose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kappa {
    A,
    B,
    C,
    D,
}

impl Kappa {
    pub const ALL: [Kappa; 4] = [Kappa::A, Kappa::B, Kappa::C, Kappa::D];

    pub fn cooperation(self) -> Cooperation {
        match self {
            Kappa::A | Kappa::B => Cooperation::Supportive,
            Kappa::C | Kappa::D => Cooperation::Unsupported,
        }
    }

    pub fn outcome(self) -> Outcome {
        match self {
            Kappa::A | Kappa::C => Outcome::Win,
            Kappa::B | Kappa::D => Outcome::Lose,
        }
    }

    pub fn from_parts(cooperation: Cooperation, outcome: Outcome) -> Kappa {
        match (cooperation, outcome) {
            (Cooperation::Supportive, Outcome::Win) => Kappa::A,
            (Cooperation::Supportive, Outcome::Lose) => Kappa::B,
            (Cooperation::Unsupported, Outcome::Win) => Kappa::C,
            (Cooperation::Unsupported, Outcome::Lose) => Kappa::D,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kappa::A => "A",
            Kappa::B => "B",
            Kappa::C => "C",
            Kappa::D => "D",
        }
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kappa {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Kappa::A),
            "B" => Ok(Kappa::B),
            "C" => Ok(Kappa::C),
            "D" => Ok(Kappa::D),
            other => Err(format!("unknown conversation group {other:?}")),
        }
    }
}

/// The pools an utterance contributes to: one for Justices, two for lawyers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Single(Kappa),
    Double(Kappa, Kappa),
}

impl Membership {
    pub fn kappas(self) -> impl Iterator<Item = Kappa> {
        let (a, b) = match self {
            Membership::Single(k) => (k, None),
            Membership::Double(k, l) => (k, Some(l)),
        };
        std::iter::once(a).chain(b)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GroupingError {
    #[error("case {case_id:?}: justice {justice_id:?} has no recorded vote")]
    MissingVote { case_id: String, justice_id: String },
}

/// Role of an utterance, or `None` for a Justice turn whose addressee is unknown.
pub fn role_of(u: &Utterance, meta: &CaseMeta) -> Result<Option<RoleId>, GroupingError> {
    match u.speaker {
        Speaker::Lawyer { side } => Ok(Some(match side {
            Side::Petitioner => RoleId(5),
            Side::Respondent => RoleId(6),
        })),
        Speaker::Justice { addressee } => {
            let vote = meta
                .justice_votes
                .get(&u.speaker_id)
                .ok_or_else(|| GroupingError::MissingVote {
                    case_id: u.case_id.clone(),
                    justice_id: u.speaker_id.clone(),
                })?;
            Ok(addressee.map(|addr| justice_role(*vote, addr)))
        }
    }
}

pub fn justice_role(vote: Side, addressee: Side) -> RoleId {
    match (vote, addressee) {
        (Side::Petitioner, Side::Petitioner) => RoleId(1),
        (Side::Petitioner, Side::Respondent) => RoleId(2),
        (Side::Respondent, Side::Petitioner) => RoleId(3),
        (Side::Respondent, Side::Respondent) => RoleId(4),
    }
}

pub fn kappa_of(role: RoleId, winner: Side) -> Membership {
    use Kappa::*;
    use Side::*;
    match (role.0, winner) {
        // I.i
        (1, Petitioner) => Membership::Single(A),
        (1, Respondent) => Membership::Single(B),
        // II.i
        (2, Respondent) => Membership::Single(C),
        (2, Petitioner) => Membership::Single(D),
        // I.ii
        (3, Petitioner) => Membership::Single(C),
        (3, Respondent) => Membership::Single(D),
        // II.ii
        (4, Respondent) => Membership::Single(A),
        (4, Petitioner) => Membership::Single(B),
        // lawyers sit in both groups of their side
        (5, Petitioner) | (6, Respondent) => Membership::Double(A, C),
        (5, Respondent) | (6, Petitioner) => Membership::Double(B, D),
        _ => unreachable!("role ids are 1..=6"),
    }
}

/// Pool membership of one utterance; `None` when it cannot be grouped.
pub fn membership_of(u: &Utterance, meta: &CaseMeta) -> Result<Option<Membership>, GroupingError> {
    Ok(role_of(u, meta)?.map(|role| kappa_of(role, meta.winner)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PoolStats {
    pub utterances: usize,
    pub lawsuits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    /// Each pool is sorted by `(case_id, utterance_index)`.
    pub pools: BTreeMap<Kappa, Vec<UttRef>>,
    /// Justice turns with a vote but no recorded addressee.
    pub excluded: Vec<UttRef>,
}

impl Partition {
    pub fn pool(&self, kappa: Kappa) -> &[UttRef] {
        self.pools.get(&kappa).map_or(&[], Vec::as_slice)
    }

    pub fn stats(&self) -> BTreeMap<Kappa, PoolStats> {
        Kappa::ALL
            .into_iter()
            .map(|k| {
                let pool = self.pool(k);
                (
                    k,
                    PoolStats {
                        utterances: pool.len(),
                        lawsuits: crate::corpus::distinct_cases(pool),
                    },
                )
            })
            .collect()
    }

    /// Pools keyed by utterance, for looking up where an utterance landed.
    pub fn memberships(&self) -> BTreeMap<&UttRef, Vec<Kappa>> {
        let mut out: BTreeMap<&UttRef, Vec<Kappa>> = BTreeMap::new();
        for (&k, refs) in &self.pools {
            for r in refs {
                out.entry(r).or_default().push(k);
            }
        }
        out
    }
}

pub fn partition(corpus: &Corpus) -> Result<Partition, GroupingError> {
    let assigned: Vec<(UttRef, Option<Membership>)> = corpus
        .utterances
        .par_iter()
        .map(|u| {
            let meta = corpus
                .cases
                .get(&u.case_id)
                .expect("corpus invariant: every utterance has a case");
            Ok((u.reference(), membership_of(u, meta)?))
        })
        .collect::<Result<_, GroupingError>>()?;

    let mut pools: BTreeMap<Kappa, Vec<UttRef>> =
        Kappa::ALL.into_iter().map(|k| (k, Vec::new())).collect();
    let mut excluded = Vec::new();
    // corpus utterances are already in canonical order, so pools come out sorted
    for (r, m) in assigned {
        match m {
            Some(m) => {
                for k in m.kappas() {
                    pools.get_mut(&k).expect("all pools present").push(r.clone());
                }
            }
            None => excluded.push(r),
        }
    }
    if !excluded.is_empty() {
        log::warn!(
            "{} justice utterances have no recorded addressee and were left out of every pool",
            excluded.len()
        );
    }
    Ok(Partition { pools, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus_str;

    fn justice(vote: Side, addr: Side) -> (Utterance, CaseMeta) {
        let meta = CaseMeta {
            case_id: "c".into(),
            winner: Side::Petitioner,
            justice_votes: [("J".to_string(), vote)].into(),
        };
        let u = Utterance {
            case_id: "c".into(),
            utterance_index: 0,
            speaker_id: "J".into(),
            speaker: Speaker::Justice {
                addressee: Some(addr),
            },
            text: String::new(),
            sentences: vec![],
            pretagged: None,
        };
        (u, meta)
    }

    #[test]
    fn table_one_rows() {
        let (u, m) = justice(Side::Petitioner, Side::Petitioner);
        assert_eq!(role_of(&u, &m).unwrap(), RoleId::new(1));
        let (u, m) = justice(Side::Respondent, Side::Petitioner);
        assert_eq!(role_of(&u, &m).unwrap(), RoleId::new(3));
        let (mut u, m) = justice(Side::Respondent, Side::Petitioner);
        u.speaker = Speaker::Lawyer {
            side: Side::Respondent,
        };
        assert_eq!(role_of(&u, &m).unwrap(), RoleId::new(6));
    }

    #[test]
    fn missing_vote() {
        let (mut u, m) = justice(Side::Petitioner, Side::Petitioner);
        u.speaker_id = "J9".into();
        assert!(matches!(role_of(&u, &m), Err(GroupingError::MissingVote { .. })));
    }

    #[test]
    fn table_three_examples() {
        let r = |v| RoleId::new(v).unwrap();
        assert_eq!(kappa_of(r(1), Side::Petitioner), Membership::Single(Kappa::A));
        assert_eq!(kappa_of(r(2), Side::Respondent), Membership::Single(Kappa::C));
        assert_eq!(
            kappa_of(r(5), Side::Respondent),
            Membership::Double(Kappa::B, Kappa::D)
        );
    }

    /// Enumerates the cooperation groups and their gathering rules pair by
    /// pair and checks the closed-form mapping against them.
    #[test]
    fn mapping_matches_table_enumeration() {
        // (group, member roles, κ when petitioner wins, κ when respondent wins)
        let groups: [(&str, [u8; 2], Kappa, Kappa); 4] = [
            ("I.i", [1, 5], Kappa::A, Kappa::B),
            ("I.ii", [3, 5], Kappa::C, Kappa::D),
            ("II.i", [2, 6], Kappa::D, Kappa::C),
            ("II.ii", [4, 6], Kappa::B, Kappa::A),
        ];
        for role in 1..=6u8 {
            for winner in [Side::Petitioner, Side::Respondent] {
                let mut expected: Vec<Kappa> = groups
                    .iter()
                    .filter(|(_, roles, _, _)| roles.contains(&role))
                    .map(|&(_, _, pe, re)| if winner == Side::Petitioner { pe } else { re })
                    .collect();
                expected.sort();
                let mut got: Vec<Kappa> = kappa_of(RoleId::new(role).unwrap(), winner).kappas().collect();
                got.sort();
                assert_eq!(got, expected, "role {role}, winner {winner}");
            }
        }
    }

    #[test]
    fn kappa_parts_are_a_bijection() {
        for k in Kappa::ALL {
            assert_eq!(Kappa::from_parts(k.cooperation(), k.outcome()), k);
        }
    }

    #[test]
    fn toy_corpus() {
        let src = r#"{"kind":"case","case":"c1","winner":"petitioner","votes":{"J1":"petitioner","J2":"respondent"}}
{"kind":"utt","case":"c1","idx":0,"speaker":"J1","sk":"justice","addr":"petitioner","text":"a"}
{"kind":"utt","case":"c1","idx":1,"speaker":"L1","sk":"lawyer","side":"petitioner","text":"b"}
{"kind":"utt","case":"c1","idx":2,"speaker":"J2","sk":"justice","addr":"petitioner","text":"c"}"#;
        let p = partition(&parse_corpus_str(src).unwrap()).unwrap();
        let idx = |k| p.pool(k).iter().map(|r| r.utterance_index).collect::<Vec<_>>();
        assert_eq!(idx(Kappa::A), [0, 1]);
        assert_eq!(idx(Kappa::C), [1, 2]);
        assert!(idx(Kappa::B).is_empty());
        assert!(idx(Kappa::D).is_empty());
        assert_eq!(p.stats()[&Kappa::A], PoolStats { utterances: 2, lawsuits: 1 });
    }

    #[test]
    fn empty_corpus_has_four_empty_pools() {
        let p = partition(&Corpus::default()).unwrap();
        assert_eq!(p.pools.len(), 4);
        assert!(p.pools.values().all(Vec::is_empty));
    }

    #[test]
    fn unknown_addressee_is_excluded() {
        let src = r#"{"kind":"case","case":"c1","winner":"petitioner","votes":{"J1":"petitioner"}}
{"kind":"utt","case":"c1","idx":0,"speaker":"J1","sk":"justice","addr":null,"text":"a"}"#;
        let p = partition(&parse_corpus_str(src).unwrap()).unwrap();
        assert_eq!(p.excluded.len(), 1);
        assert!(p.pools.values().all(Vec::is_empty));
    }

    #[test]
    fn flipping_the_winner_swaps_outcomes() {
        for role in 1..=6u8 {
            let r = RoleId::new(role).unwrap();
            let pe: Vec<Kappa> = kappa_of(r, Side::Petitioner).kappas().collect();
            let re: Vec<Kappa> = kappa_of(r, Side::Respondent).kappas().collect();
            let swapped: Vec<Kappa> = pe
                .iter()
                .map(|k| {
                    let flip = match k.outcome() {
                        Outcome::Win => Outcome::Lose,
                        Outcome::Lose => Outcome::Win,
                    };
                    Kappa::from_parts(k.cooperation(), flip)
                })
                .collect();
            assert_eq!(swapped, re);
        }
    }
}
