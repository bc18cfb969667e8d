//! Fixtures and generators for tests, benchmarks and demos.
//!
//! [`generate`] builds a random but internally consistent world: a
//! constraint table, a template library whose every pattern mentions both
//! the role and the trigger, and a corpus whose gold arguments always satisfy
//! the constraints. [`PlantedOracle`] scripts a lookup backend that entails
//! exactly the gold hypotheses.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintTable;
use crate::corpus::{
    generate_candidates, Argument, Candidate, Document, EntityMention, EventMention, Label, Span,
};
use crate::entailment::{EntailmentJudgment, LookupBackend, PremiseHypothesisPair};
use crate::templates::{EventContext, Template, TemplateCategory, TemplateLibrary};

fn span_of(text: &str, needle: &str) -> Span {
    let byte = text.find(needle).expect("fixture substring");
    let start = text[..byte].chars().count();
    Span::new(start, start + needle.chars().count())
}

/// The hiring example: "John D. Idol" is the Person of "hired"; "Acme Corp"
/// shares the sentence, "Boston" sits in the next one.
pub fn figure_one() -> Document {
    let s1 = "Acme Corp said on Monday it hired John D. Idol as chief executive.";
    let text = format!("{s1} Shares rose in Boston.");
    let n1 = s1.chars().count();
    let entity = |id: &str, surface: &str, ty: &str| EntityMention {
        id: id.into(),
        span: span_of(&text, surface),
        surface: surface.into(),
        entity_type: ty.into(),
    };
    Document {
        id: "d1".into(),
        sentences: vec![Span::new(0, n1), Span::new(n1 + 1, text.chars().count())],
        entities: vec![
            entity("e1", "Acme Corp", "ORG"),
            entity("e2", "John D. Idol", "PER"),
            entity("e3", "Boston", "GPE"),
        ],
        events: vec![EventMention {
            id: "ev1".into(),
            trigger_span: span_of(&text, "hired"),
            trigger_surface: "hired".into(),
            event_type: "Personnel".into(),
            event_subtype: "Start-Position".into(),
            arguments: vec![Argument {
                entity_id: "e2".into(),
                role: "Person".into(),
            }],
        }],
        coref_chains: vec![],
        text,
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub roles: usize,
    pub entity_types: usize,
    pub subtypes: usize,
    pub max_sentences: usize,
    pub max_entities_per_sentence: usize,
    pub max_events_per_sentence: usize,
    pub max_templates_per_role: usize,
    /// Probability that an allowed same-sentence entity is a gold argument.
    pub argument_rate: f64,
    /// Probability of adding a gold argument from another sentence.
    pub cross_sentence_rate: f64,
    /// Probability that an entity joins a coreference chain.
    pub coref_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 60,
            roles: 6,
            entity_types: 4,
            subtypes: 5,
            max_sentences: 3,
            max_entities_per_sentence: 4,
            max_events_per_sentence: 2,
            max_templates_per_role: 3,
            argument_rate: 0.5,
            cross_sentence_rate: 0.0,
            coref_rate: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub documents: Vec<Document>,
    pub library: TemplateLibrary,
    pub table: ConstraintTable,
}

const PATTERNS: &[(&str, TemplateCategory)] = &[
    (
        "{arg} is the {role} of the {trg} event.",
        TemplateCategory::ExplicitTrg,
    ),
    (
        "In the {trg} ({trg_type}), {arg} acts as {role}.",
        TemplateCategory::ExplicitTrg,
    ),
    (
        "{arg} was {role} during {trg} of kind {trg_subtype}.",
        TemplateCategory::ExplicitTrg,
    ),
    (
        "The {trg} had {arg} as its {role}.",
        TemplateCategory::ExplicitTrg,
    ),
];

pub fn role_name(i: usize) -> String {
    format!("Role{i}")
}

pub fn random_library(
    roles: &[String],
    max_templates: usize,
    rng: &mut impl Rng,
) -> TemplateLibrary {
    let mut by_role = BTreeMap::new();
    for role in roles {
        let n = rng.random_range(1..=max_templates.clamp(1, PATTERNS.len()));
        let mut picks: Vec<usize> = (0..PATTERNS.len()).collect();
        picks.shuffle(rng);
        let templates = picks[..n]
            .iter()
            .map(|&p| {
                let (pattern, category) = PATTERNS[p];
                let pattern = pattern.replace("{role}", &role.to_lowercase());
                Template::parse(
                    format!("{}.{p:02}", role.to_lowercase()),
                    role.as_str(),
                    &pattern,
                    category,
                    None,
                )
                .expect("synthetic pattern parses")
            })
            .collect();
        by_role.insert(role.clone(), templates);
    }
    TemplateLibrary::new(by_role, BTreeMap::new(), Default::default())
        .expect("synthetic library validates")
}

/// Every subtype lists a random non-empty subset of roles, each allowing a
/// random non-empty subset of entity types.
pub fn random_table(
    subtypes: &[String],
    roles: &[String],
    types: &[String],
    rng: &mut impl Rng,
) -> ConstraintTable {
    let mut table = ConstraintTable::default();
    for s in subtypes {
        let k = rng.random_range(1..=roles.len());
        for role in roles.choose_multiple(rng, k) {
            let m = rng.random_range(1..=types.len());
            for ty in types.choose_multiple(rng, m) {
                table.grant(s, role, ty);
            }
        }
    }
    table
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticWorld {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let roles: Vec<String> = (0..cfg.roles).map(role_name).collect();
    let types: Vec<String> = (0..cfg.entity_types).map(|i| format!("TYPE{i}")).collect();
    let subtypes: Vec<String> = (0..cfg.subtypes)
        .map(|i| format!("Kind{}.Sub{i}", i % 2))
        .collect();
    let table = random_table(&subtypes, &roles, &types, &mut rng);
    let library = random_library(&roles, cfg.max_templates_per_role, &mut rng);
    let documents = (0..cfg.documents)
        .map(|d| {
            random_document(
                &format!("doc{d:04}"),
                cfg,
                &types,
                &subtypes,
                &table,
                &mut rng,
            )
        })
        .collect();
    SyntheticWorld {
        documents,
        library,
        table,
    }
}

struct TextBuilder {
    text: String,
    chars: usize,
}

impl TextBuilder {
    fn push(&mut self, s: &str) -> Span {
        let start = self.chars;
        self.text.push_str(s);
        self.chars += s.chars().count();
        Span::new(start, self.chars)
    }
}

const FILLER: &[&str] = &[
    "the",
    "report",
    "said",
    "café",
    "after",
    "near",
    "with",
    "today",
    "officials",
];

fn random_document(
    id: &str,
    cfg: &SyntheticConfig,
    types: &[String],
    subtypes: &[String],
    table: &ConstraintTable,
    rng: &mut ChaCha8Rng,
) -> Document {
    let mut b = TextBuilder {
        text: String::new(),
        chars: 0,
    };
    let mut sentences = Vec::new();
    let mut entities: Vec<EntityMention> = Vec::new();
    let mut sentence_entities: Vec<Vec<usize>> = Vec::new();
    let mut triggers: Vec<(Span, String, usize)> = Vec::new();
    let n_sent = rng.random_range(1..=cfg.max_sentences.max(1));
    for s in 0..n_sent {
        if s > 0 {
            b.push(" ");
        }
        let start = b.chars;
        let n_ent = rng.random_range(0..=cfg.max_entities_per_sentence);
        let n_ev = rng.random_range(0..=cfg.max_events_per_sentence);
        let mut slots: Vec<bool> = std::iter::repeat_n(true, n_ent)
            .chain(std::iter::repeat_n(false, n_ev))
            .collect();
        slots.shuffle(rng);
        let mut here = Vec::new();
        b.push("Then");
        for is_entity in slots {
            b.push(" ");
            b.push(FILLER.choose(rng).expect("filler"));
            b.push(" ");
            if is_entity {
                let surface = format!("Ent {}-{}", id, entities.len());
                let span = b.push(&surface);
                here.push(entities.len());
                entities.push(EntityMention {
                    id: format!("m{}", entities.len()),
                    span,
                    surface,
                    entity_type: types.choose(rng).expect("types").clone(),
                });
            } else {
                let surface = format!("trig{}", triggers.len());
                let span = b.push(&surface);
                triggers.push((span, surface, s));
            }
        }
        b.push(".");
        sentences.push(Span::new(start, b.chars));
        sentence_entities.push(here);
    }

    let mut events = Vec::new();
    for (i, (span, surface, sent)) in triggers.into_iter().enumerate() {
        let subtype = subtypes.choose(rng).expect("subtypes");
        let (event_type, event_subtype) = subtype.split_once('.').expect("qualified");
        let mut arguments = Vec::new();
        for &e in &sentence_entities[sent] {
            let allowed: Vec<String> = table
                .allowed_roles(subtype, &entities[e].entity_type)
                .expect("subtype in table")
                .into_iter()
                .collect();
            if !allowed.is_empty() && rng.random_bool(cfg.argument_rate) {
                arguments.push(Argument {
                    entity_id: entities[e].id.clone(),
                    role: allowed.choose(rng).expect("non-empty").clone(),
                });
            }
        }
        if cfg.cross_sentence_rate > 0.0 && rng.random_bool(cfg.cross_sentence_rate) {
            let far: Vec<usize> = (0..entities.len())
                .filter(|e| !sentence_entities[sent].contains(e))
                .collect();
            let roles: Vec<String> = table
                .roles_of_event(subtype)
                .expect("subtype")
                .into_iter()
                .collect();
            if let Some(&e) = far.choose(rng) {
                arguments.push(Argument {
                    entity_id: entities[e].id.clone(),
                    role: roles.choose(rng).expect("non-empty").clone(),
                });
            }
        }
        events.push(EventMention {
            id: format!("ev{i}"),
            trigger_span: span,
            trigger_surface: surface,
            event_type: event_type.into(),
            event_subtype: event_subtype.into(),
            arguments,
        });
    }

    let mut chains: Vec<Vec<String>> = Vec::new();
    let mut open: Option<Vec<String>> = None;
    for e in &entities {
        if rng.random_bool(cfg.coref_rate) {
            open.get_or_insert_with(Vec::new).push(e.id.clone());
            if rng.random_bool(0.4) {
                chains.extend(open.take());
            }
        }
    }
    chains.extend(open);

    Document {
        id: id.into(),
        text: b.text,
        sentences,
        entities,
        events,
        coref_chains: chains,
    }
}

/// A gold link and the pairs that entail it.
#[derive(Debug, Clone)]
pub struct PlantedLink {
    pub candidate: Candidate,
    pub pairs: Vec<PremiseHypothesisPair>,
}

/// Lookup oracle that entails every gold hypothesis at a fixed probability
/// and leaves everything else at the neutral default.
#[derive(Debug, Clone)]
pub struct PlantedOracle {
    pub backend: LookupBackend,
    pub links: Vec<PlantedLink>,
}

pub const PLANTED: EntailmentJudgment = EntailmentJudgment {
    entail: 0.9,
    neutral: 0.05,
    contradict: 0.05,
};

impl PlantedOracle {
    pub fn new(docs: &[Document], lib: &TemplateLibrary) -> Self {
        let mut backend = LookupBackend::default();
        let mut links = Vec::new();
        for doc in docs {
            for c in generate_candidates(doc) {
                let Label::Role(role) = &c.gold_role else {
                    continue;
                };
                let event = doc.event(&c.event_id).expect("candidate event");
                let entity = doc.entity(&c.entity_id).expect("candidate entity");
                let premise = doc.trigger_sentence(event).expect("trigger sentence");
                let key = event.subtype_key();
                let ctx = EventContext::new(&event.trigger_surface, &event.event_type, &key);
                let pairs: Vec<PremiseHypothesisPair> = lib
                    .applicable(role, &key)
                    .map(|t| {
                        let h = t
                            .verbalize(&ctx, &entity.surface, &lib.canonical_map)
                            .expect("verbalizes");
                        PremiseHypothesisPair::new(premise, h)
                    })
                    .collect();
                for p in &pairs {
                    backend.insert(p.clone(), PLANTED);
                }
                links.push(PlantedLink {
                    candidate: c,
                    pairs,
                });
            }
        }
        PlantedOracle { backend, links }
    }

    /// Removes the entries of `k` distinct gold links chosen by `seed` and
    /// returns the corrupted candidates.
    pub fn corrupt(&mut self, k: usize, seed: u64) -> Vec<Candidate> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picked: BTreeSet<usize> =
            rand::seq::index::sample(&mut rng, self.links.len(), k.min(self.links.len()))
                .into_iter()
                .collect();
        picked
            .into_iter()
            .map(|i| {
                for p in &self.links[i].pairs {
                    self.backend.remove(p);
                }
                self.links[i].candidate.clone()
            })
            .collect()
    }
}
