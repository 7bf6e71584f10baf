//! Seeded generator of publication-style graph pairs with planted alignments.
//!
//! True people belong to labs; a lab shares an organization and a research
//! topic with its sibling lab. Each person leads publications in an already
//! aligned "pre" graph and in an unaligned "post" graph, tagged mostly with
//! their own research interests. Pre-graph people
//! carry their full name and an opaque hash of first initial plus last name;
//! post-graph people carry only the hash. Post-graph keyword occurrences are
//! replaced, at the noise rate, by misspelled variants that also carry a
//! wrong concept id. The ground truth maps every post person to its pre
//! person.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::GroundTruth;
use crate::graph::{EntityNode, EventHub, FactGraph, FactTriple, GraphError, NodeId, RawGraph};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("n_true_entities must be at least 1")]
    NoEntities,
    #[error("{field} = {value} is outside [0, 1]")]
    RateOutOfRange { field: &'static str, value: f64 },
    #[error("events per entity range {min}..={max} is empty")]
    EventRange { min: u32, max: u32 },
    #[error("{0} must be at least 1")]
    ZeroShape(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_true_entities: usize,
    /// Chance that a person shows up as two nodes in the post graph.
    pub duplicate_rate: f64,
    pub events_per_entity_min: u32,
    pub events_per_entity_max: u32,
    /// Chance that a post-graph keyword occurrence is a noisy variant.
    pub attribute_noise_rate: f64,
    /// Chance that a person reuses an earlier person's first initial and last name.
    pub name_collision_rate: f64,
    pub seed: u64,
    pub lab_size: usize,
    pub keywords_per_topic: usize,
    pub interests_per_person: usize,
    pub keywords_per_event: u32,
    pub max_coauthors: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_true_entities: 100,
            duplicate_rate: 0.0,
            events_per_entity_min: 1,
            events_per_entity_max: 3,
            attribute_noise_rate: 0.0,
            name_collision_rate: 0.0,
            seed: 0,
            lab_size: 6,
            keywords_per_topic: 12,
            interests_per_person: 4,
            keywords_per_event: 3,
            max_coauthors: 2,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_true_entities == 0 {
            return Err(SynthError::NoEntities);
        }
        for (field, value) in [
            ("duplicate_rate", self.duplicate_rate),
            ("attribute_noise_rate", self.attribute_noise_rate),
            ("name_collision_rate", self.name_collision_rate),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SynthError::RateOutOfRange { field, value });
            }
        }
        if self.events_per_entity_min > self.events_per_entity_max {
            return Err(SynthError::EventRange {
                min: self.events_per_entity_min,
                max: self.events_per_entity_max,
            });
        }
        for (name, v) in [
            ("lab_size", self.lab_size),
            ("keywords_per_topic", self.keywords_per_topic),
            ("interests_per_person", self.interests_per_person),
            ("keywords_per_event", self.keywords_per_event as usize),
        ] {
            if v == 0 {
                return Err(SynthError::ZeroShape(name));
            }
        }
        Ok(())
    }
}

/// Generated graphs. `post` is the graph to align, `pre` the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPair {
    pub post: FactGraph,
    pub pre: FactGraph,
    pub truth: GroundTruth,
}

struct Person {
    first: String,
    last: String,
    hash: String,
    lab: usize,
    interests: Vec<usize>,
}

const SYLLABLES: [&str; 24] = [
    "ka", "ro", "mi", "ten", "sa", "lo", "ver", "an", "dri", "ne", "bo", "gal", "tu", "rin", "phe", "mo", "sil", "qua",
    "den", "lu", "zor", "ep", "ha", "cy",
];

fn word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    (0..syllables).map(|_| *SYLLABLES.choose(rng).expect("non-empty")).collect()
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Opaque name key, standing in for the data provider's hash.
fn name_hash(initial: char, last: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut buf = [0u8; 4];
    for &b in initial.encode_utf8(&mut buf).as_bytes().iter().chain(b"|").chain(last.as_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("h{h:016x}")
}

/// One random single-character edit of `w`.
fn misspell(rng: &mut ChaCha8Rng, w: &str) -> String {
    let mut chars: Vec<char> = w.chars().collect();
    let letter = (b'a' + rng.gen_range(0..26u8)) as char;
    let pos = rng.gen_range(0..chars.len());
    match rng.gen_range(0..3) {
        0 => chars[pos] = letter,
        1 => {
            chars.remove(pos);
        }
        _ => chars.insert(pos, letter),
    }
    chars.into_iter().collect()
}

struct Builder {
    entities: BTreeMap<NodeId, EntityNode>,
    events: Vec<EventHub>,
    facts: Vec<FactTriple>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            entities: BTreeMap::new(),
            events: Vec::new(),
            facts: Vec::new(),
        }
    }

    fn entity(&mut self, id: &str, make: impl FnOnce(NodeId) -> EntityNode) -> NodeId {
        let id = NodeId::new(id).expect("generated ids are non-empty");
        self.entities
            .entry(id.clone())
            .or_insert_with(|| make(id.clone()));
        id
    }

    fn finish(self) -> Result<FactGraph, GraphError> {
        crate::graph::load_validate(RawGraph {
            entities: self.entities.into_values().collect(),
            events: self.events,
            facts: self.facts,
        })
    }
}

/// Generates a post/pre pair and its ground truth. Output depends only on
/// `spec`.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticPair, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_true_entities;
    let labs = n.div_ceil(spec.lab_size);
    let topics = labs.div_ceil(2);

    // Vocabulary: distinct words, long enough that one edit stays well within
    // a 0.3 normalized distance.
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut vocab: Vec<String> = Vec::with_capacity(topics * spec.keywords_per_topic);
    while vocab.len() < topics * spec.keywords_per_topic {
        let syl = rng.gen_range(3..=5);
        let w = word(&mut rng, syl);
        if seen.insert(w.clone()) {
            vocab.push(w);
        }
    }
    let variants: Vec<[String; 2]> = vocab
        .iter()
        .map(|w| {
            let mut pick = || loop {
                let v = misspell(&mut rng, w);
                if !seen.contains(&v) {
                    return v;
                }
            };
            [pick(), pick()]
        })
        .collect();
    let orgs: Vec<String> = (0..topics)
        .map(|i| format!("{} Institute {i}", capitalized(&word(&mut rng, 3))))
        .collect();

    let mut people: Vec<Person> = Vec::with_capacity(n);
    let mut hashes: BTreeSet<String> = BTreeSet::new();
    for i in 0..n {
        let lab = i / spec.lab_size;
        let topic = lab / 2;
        let pool: Vec<usize> = (0..spec.keywords_per_topic)
            .map(|k| topic * spec.keywords_per_topic + k)
            .collect();
        let take = pool.len().min(spec.interests_per_person);
        let interests: Vec<usize> = pool.choose_multiple(&mut rng, take).copied().collect();
        let (first, last) = if i > 0 && rng.gen_bool(spec.name_collision_rate) {
            let j = rng.gen_range(0..i);
            let initial = people[j].first.chars().next().expect("non-empty");
            let rest = word(&mut rng, 2);
            (format!("{initial}{rest}"), people[j].last.clone())
        } else {
            // Collisions happen only when asked for.
            loop {
                let first = capitalized(&word(&mut rng, 2));
                let syl = rng.gen_range(3..=4);
                let last = capitalized(&word(&mut rng, syl));
                let initial = first.chars().next().expect("non-empty");
                if !hashes.contains(&name_hash(initial, &last)) {
                    break (first, last);
                }
            }
        };
        let initial = first.chars().next().expect("non-empty");
        let hash = name_hash(initial, &last);
        hashes.insert(hash.clone());
        people.push(Person {
            hash,
            first,
            last,
            lab,
            interests,
        });
    }
    let lab_members: Vec<Vec<usize>> = (0..labs)
        .map(|l| (l * spec.lab_size..((l + 1) * spec.lab_size).min(n)).collect())
        .collect();

    let mut pre = Builder::new();
    let mut post = Builder::new();
    let mut truth = GroundTruth::new();
    let duplicated: Vec<bool> = (0..n).map(|_| rng.gen_bool(spec.duplicate_rate)).collect();
    for (i, p) in people.iter().enumerate() {
        let pre_id = pre.entity(&format!("pre:p{i}"), |id| {
            EntityNode::new(id, "person")
                .with_attr("name", [format!("{} {}", p.first, p.last)])
                .with_attr("name_hash", [p.hash.clone()])
        });
        let mut post_ids = alloc::vec![format!("post:p{i}")];
        if duplicated[i] {
            post_ids.push(format!("post:p{i}b"));
        }
        for pid in post_ids {
            let node = post.entity(&pid, |id| {
                EntityNode::new(id, "person").with_attr("name_hash", [p.hash.clone()])
            });
            truth
                .insert(node, pre_id.clone())
                .expect("post ids are unique");
        }
    }

    for (side, year) in [(0usize, 2018), (1, 2019)] {
        let mut serial = 0usize;
        for (i, lead) in people.iter().enumerate() {
            let count = rng.gen_range(spec.events_per_entity_min..=spec.events_per_entity_max);
            for _ in 0..count {
                let mut authors = alloc::vec![i];
                let mates: Vec<usize> = lab_members[lead.lab].iter().copied().filter(|&m| m != i).collect();
                let k = rng.gen_range(0..=spec.max_coauthors as usize).min(mates.len());
                authors.extend(mates.choose_multiple(&mut rng, k).copied());
                // Authors keep reusing their own keywords; a coauthor
                // occasionally contributes one of theirs.
                let kw_take = (spec.keywords_per_event as usize).min(lead.interests.len());
                let mut chosen: Vec<usize> = lead.interests.choose_multiple(&mut rng, kw_take).copied().collect();
                if authors.len() > 1 && rng.gen_bool(0.5) {
                    let mate = &people[*authors[1..].choose(&mut rng).expect("non-empty")];
                    let kw = *mate.interests.choose(&mut rng).expect("non-empty");
                    if !chosen.contains(&kw) {
                        chosen.push(kw);
                    }
                }

                let prefix = if side == 0 { "pre" } else { "post" };
                let b = if side == 0 { &mut pre } else { &mut post };
                let ev = NodeId::new(format!("{prefix}:e{serial}")).expect("non-empty");
                serial += 1;
                let date = format!("{year}-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28));
                b.events.push(EventHub::new(ev.clone()).with_attr("date", [date]));

                let mut orgs_here: Vec<usize> = Vec::new();
                for &a in &authors {
                    let pid = if side == 0 {
                        format!("pre:p{a}")
                    } else if duplicated[a] && rng.gen_bool(0.5) {
                        format!("post:p{a}b")
                    } else {
                        format!("post:p{a}")
                    };
                    let pid = NodeId::new(pid).expect("non-empty");
                    b.facts.push(FactTriple::new(ev.clone(), "author", pid));
                    orgs_here.push(people[a].lab / 2);
                }
                orgs_here.sort_unstable();
                orgs_here.dedup();
                for o in orgs_here {
                    let oid = b.entity(&format!("{prefix}:o{o}"), |id| {
                        EntityNode::new(id, "organization").with_attr("name", [orgs[o].clone()])
                    });
                    b.facts.push(FactTriple::new(ev.clone(), "affiliation", oid));
                }
                for kw in chosen {
                    let noisy = side == 1 && rng.gen_bool(spec.attribute_noise_rate);
                    let tid = if noisy {
                        let v = rng.gen_range(0..2);
                        b.entity(&format!("post:t{kw}~{v}"), |id| {
                            EntityNode::new(id, "text")
                                .with_attr("text", [variants[kw][v].clone()])
                                .with_attr("qnode_id", [format!("QX{kw}_{v}")])
                        })
                    } else {
                        b.entity(&format!("{prefix}:t{kw}"), |id| {
                            EntityNode::new(id, "text")
                                .with_attr("text", [vocab[kw].clone()])
                                .with_attr("qnode_id", [format!("Q{kw}")])
                        })
                    };
                    b.facts.push(FactTriple::new(ev.clone(), "keyword", tid));
                }
            }
        }
    }

    Ok(SyntheticPair {
        post: post.finish()?,
        pre: pre.finish()?,
        truth,
    })
}
