//! Deterministic BLM-style episodes with pseudo-embeddings, for exercising the
//! full pipeline without a language model.
//!
//! Contexts instantiate the agreement template: rows 1-4 alternate subject
//! number with one attractor, rows 5-7 add a second attractor, and the answer
//! completes row 8 (plural subject, plural first attractor, singular second
//! attractor, plural verb). Sentences are rendered in French over a small
//! lexicon and placed in one of three clause frames.
//!
//! A sentence embedding is a sum of unit basis vectors, one per lexeme, clause
//! frame and structural feature, plus a signed number direction per slot, plus
//! Gaussian noise keyed by the sentence id. The number directions carry the
//! agreement pattern; the subject is weighted most and the second attractor
//! least, so a partially trained model confuses the second attractor first.
//! All feature directions of a sentence flip together with a balanced sign
//! keyed by its subject lexeme, so an untrained model has no preferred answer.
//!
//! Type II episodes draw fresh lexemes for every context row; Type III also
//! draws the clause frame per row. Answers reuse the lexemes and frame of the
//! last context row.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use super::episode::{BlmEpisode, Candidate, Category, DataType};
use super::store::EmbeddingStore;
use crate::error::{Error, Result};
use crate::model::EMBED_DIM;

const W_LEXEME: f32 = 1.0;
const W_FRAME: f32 = 1.0;
const W_STRUCTURE: f32 = 0.6;
const W_SUBJECT: f32 = 0.45;
const W_VERB: f32 = 0.45;
const W_FIRST: f32 = 0.4;
const W_SECOND: f32 = 0.35;
pub const NOISE_SIGMA: f32 = 0.05;

const SUBJECTS: &[(&str, &str)] = &[
    ("l'ordinateur", "les ordinateurs"),
    ("la voiture", "les voitures"),
    ("le moteur", "les moteurs"),
    ("l'avion", "les avions"),
    ("la machine", "les machines"),
    ("le téléphone", "les téléphones"),
    ("la lampe", "les lampes"),
    ("le camion", "les camions"),
    ("l'imprimante", "les imprimantes"),
    ("le robot", "les robots"),
    ("la montre", "les montres"),
    ("le serveur", "les serveurs"),
];

const FIRST: &[(&str, &str)] = &[
    ("avec le programme", "avec les programmes"),
    ("avec la batterie", "avec les batteries"),
    ("sans le câble", "sans les câbles"),
    ("avec l'écran", "avec les écrans"),
    ("sur la table", "sur les tables"),
    ("près de la fenêtre", "près des fenêtres"),
    ("avec le capteur", "avec les capteurs"),
    ("sous la bâche", "sous les bâches"),
    ("avec le bouton", "avec les boutons"),
    ("derrière le mur", "derrière les murs"),
];

/// Embedded singular, embedded plural, bare singular for coordination.
const SECOND: &[(&str, &str, &str)] = &[
    ("de l'expérience", "des expériences", "l'expérience"),
    ("du laboratoire", "des laboratoires", "le laboratoire"),
    ("de la directrice", "des directrices", "la directrice"),
    ("du client", "des clients", "le client"),
    ("de l'équipe", "des équipes", "l'équipe"),
    ("du garage", "des garages", "le garage"),
    ("de la société", "des sociétés", "la société"),
    ("du voisin", "des voisins", "le voisin"),
    ("de l'usine", "des usines", "l'usine"),
    ("du projet", "des projets", "le projet"),
];

const VERBS: &[(&str, &str)] = &[
    ("est en panne", "sont en panne"),
    ("fonctionne mal", "fonctionnent mal"),
    ("a disparu", "ont disparu"),
    ("fait du bruit", "font du bruit"),
    ("coûte cher", "coûtent cher"),
    ("chauffe beaucoup", "chauffent beaucoup"),
    ("démarre lentement", "démarrent lentement"),
    ("attend la réparation", "attendent la réparation"),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Number {
    Sg,
    Pl,
}

use Number::{Pl, Sg};

impl Number {
    fn sign(self) -> f32 {
        match self {
            Sg => 1.0,
            Pl => -1.0,
        }
    }

    fn pick<T>(self, sg: T, pl: T) -> T {
        match self {
            Sg => sg,
            Pl => pl,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Main,
    /// `Jean suppose que ...`
    Completive,
    /// `... dont Jean se servait ...`
    Relative,
}

impl Frame {
    const ALL: [Frame; 3] = [Frame::Main, Frame::Completive, Frame::Relative];

    fn key(self) -> &'static str {
        match self {
            Frame::Main => "main",
            Frame::Completive => "completive",
            Frame::Relative => "relative",
        }
    }
}

/// What follows the first attractor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Second {
    None,
    Embedded(Number),
    Coordinated(Number),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Lexemes {
    pub subject: usize,
    pub first: usize,
    pub second: usize,
    pub verb: usize,
}

impl Lexemes {
    fn draw(rng: &mut impl Rng) -> Self {
        Lexemes {
            subject: rng.random_range(0..SUBJECTS.len()),
            first: rng.random_range(0..FIRST.len()),
            second: rng.random_range(0..SECOND.len()),
            verb: rng.random_range(0..VERBS.len()),
        }
    }
}

/// Everything that determines a synthetic sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SentenceFeatures {
    pub frame: Frame,
    pub lexemes: Lexemes,
    pub subject: Number,
    pub first: Number,
    pub second: Second,
    pub verb: Number,
}

/// Constraints the answer to an agreement problem must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    /// The verb agrees with the subject.
    Agreement,
    /// Subject and verb continue the sg/pl alternation (plural here).
    Progression,
    /// The first attractor is plural.
    FirstAttractor,
    /// The second attractor is singular.
    SecondAttractor,
    /// Two nouns follow the subject.
    AttractorCount,
    /// The second noun is embedded, not coordinated.
    Embedding,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::Agreement,
        Rule::Progression,
        Rule::FirstAttractor,
        Rule::SecondAttractor,
        Rule::AttractorCount,
        Rule::Embedding,
    ];

    pub fn holds(self, f: &SentenceFeatures) -> bool {
        match self {
            Rule::Agreement => f.verb == f.subject,
            Rule::Progression => f.verb == Pl,
            Rule::FirstAttractor => f.first == Pl,
            Rule::SecondAttractor => match f.second {
                Second::Embedded(n) | Second::Coordinated(n) => n == Sg,
                Second::None => true,
            },
            Rule::AttractorCount => f.second != Second::None,
            Rule::Embedding => !matches!(f.second, Second::Coordinated(_)),
        }
    }

    /// The rule a wrong answer of this category is built to break.
    pub fn named_by(category: Category) -> Option<Rule> {
        match category {
            Category::Correct => None,
            Category::Coord => Some(Rule::Embedding),
            Category::Wna => Some(Rule::AttractorCount),
            Category::Ae => Some(Rule::Agreement),
            Category::Wn1 => Some(Rule::FirstAttractor),
            Category::Wn2 => Some(Rule::SecondAttractor),
        }
    }
}

pub fn violations(f: &SentenceFeatures) -> Vec<Rule> {
    Rule::ALL.into_iter().filter(|r| !r.holds(f)).collect()
}

/// Context rows 1-7: (subject, first attractor, second attractor).
const CONTEXT_ROWS: [(Number, Number, Option<Number>); 7] = [
    (Sg, Sg, None),
    (Pl, Sg, None),
    (Sg, Pl, None),
    (Pl, Pl, None),
    (Sg, Sg, Some(Sg)),
    (Pl, Sg, Some(Sg)),
    (Sg, Pl, Some(Sg)),
];

fn context_row(row: usize, frame: Frame, lexemes: Lexemes) -> SentenceFeatures {
    let (subject, first, second) = CONTEXT_ROWS[row];
    SentenceFeatures {
        frame,
        lexemes,
        subject,
        first,
        second: second.map_or(Second::None, Second::Embedded),
        verb: subject,
    }
}

/// The answer of the given category.
pub fn candidate(category: Category, frame: Frame, lexemes: Lexemes) -> SentenceFeatures {
    let (subject, first, second, verb) = match category {
        Category::Correct => (Pl, Pl, Second::Embedded(Sg), Pl),
        Category::Coord => (Sg, Sg, Second::Coordinated(Sg), Sg),
        Category::Wna => (Sg, Sg, Second::None, Sg),
        Category::Ae => (Sg, Pl, Second::Embedded(Sg), Pl),
        Category::Wn1 => (Pl, Sg, Second::Embedded(Sg), Pl),
        Category::Wn2 => (Pl, Pl, Second::Embedded(Pl), Pl),
    };
    SentenceFeatures { frame, lexemes, subject, first, second, verb }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn render(f: &SentenceFeatures) -> String {
    let l = f.lexemes;
    let subject = f.subject.pick(SUBJECTS[l.subject].0, SUBJECTS[l.subject].1);
    let mut np = format!("{subject} {}", f.first.pick(FIRST[l.first].0, FIRST[l.first].1));
    let (sg, pl, bare) = SECOND[l.second];
    match f.second {
        Second::None => {}
        Second::Embedded(n) => {
            np.push(' ');
            np.push_str(n.pick(sg, pl));
        }
        Second::Coordinated(_) => {
            np.push_str(" et ");
            np.push_str(bare);
        }
    }
    let verb = f.verb.pick(VERBS[l.verb].0, VERBS[l.verb].1);
    let body = match f.frame {
        Frame::Main => format!("{np} {verb}"),
        Frame::Completive => format!("Jean suppose que {np} {verb}"),
        Frame::Relative => format!("{np} dont Jean se servait {verb}"),
    };
    format!("{}.", capitalize(&body))
}

/// Content id of a sentence: leading 16 hex digits of its SHA-256.
pub fn sentence_id(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

fn keyed_rng(seed: u64, domain: &str, key: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(domain.as_bytes());
    h.update([0]);
    h.update(key.as_bytes());
    let d = h.finalize();
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(d[..8].try_into().unwrap()))
}

struct Embedder {
    seed: u64,
    basis: HashMap<String, Vec<f32>>,
    /// Orientation of every feature direction, per subject lexeme.
    polarity: Vec<f32>,
}

impl Embedder {
    fn new(seed: u64) -> Self {
        let mut polarity: Vec<f32> = (0..SUBJECTS.len()).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        polarity.shuffle(&mut keyed_rng(seed, "polarity", "subject"));
        Embedder { seed, basis: HashMap::new(), polarity }
    }

    fn basis(&mut self, key: &str) -> &[f32] {
        let seed = self.seed;
        self.basis.entry(key.to_string()).or_insert_with(|| {
            let mut rng = keyed_rng(seed, "basis", key);
            let v: Vec<f64> = (0..EMBED_DIM).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter().map(|x| (x / norm) as f32).collect()
        })
    }

    fn add(&mut self, acc: &mut [f32], key: &str, w: f32) {
        for (a, b) in acc.iter_mut().zip(self.basis(key)) {
            *a += w * b;
        }
    }

    fn embed(&mut self, f: &SentenceFeatures, id: &str) -> Vec<f32> {
        let mut rng = keyed_rng(self.seed, "noise", id);
        let mut v: Vec<f32> = (0..EMBED_DIM)
            .map(|_| NOISE_SIGMA * Distribution::<f64>::sample(&StandardNormal, &mut rng) as f32)
            .collect();
        let l = f.lexemes;
        let p = self.polarity[l.subject];
        self.add(&mut v, &format!("frame:{}", f.frame.key()), W_FRAME);
        self.add(&mut v, &format!("subject:{}", l.subject), W_LEXEME);
        self.add(&mut v, &format!("first:{}", l.first), W_LEXEME);
        self.add(&mut v, &format!("verb:{}", l.verb), W_LEXEME);
        let s = W_SUBJECT * f.subject.sign() * p;
        self.add(&mut v, "number:subject", s);
        let s = W_FIRST * f.first.sign() * p;
        self.add(&mut v, "number:first", s);
        let s = W_VERB * f.verb.sign() * p;
        self.add(&mut v, "number:verb", s);
        let (structure, n) = match f.second {
            Second::None => return v,
            Second::Embedded(n) => ("embedded", n),
            Second::Coordinated(n) => ("coordinated", n),
        };
        self.add(&mut v, &format!("second:{}", l.second), W_LEXEME);
        let s = W_STRUCTURE * p;
        self.add(&mut v, &format!("structure:{structure}"), s);
        let s = W_SECOND * n.sign() * p;
        self.add(&mut v, "number:second", s);
        v
    }
}

/// One generated episode with the features behind each sentence.
#[derive(Clone, Debug)]
pub struct SyntheticEpisode {
    pub episode: BlmEpisode,
    pub context: Vec<SentenceFeatures>,
    pub candidates: Vec<SentenceFeatures>,
}

/// Streaming generator; episodes and the store grow together.
pub struct SyntheticGenerator {
    data_type: DataType,
    rng: ChaCha8Rng,
    embedder: Embedder,
    store: EmbeddingStore,
}

impl SyntheticGenerator {
    pub fn new(seed: u64, data_type: DataType) -> Self {
        SyntheticGenerator {
            data_type,
            rng: keyed_rng(seed, "episodes", data_type.name()),
            embedder: Embedder::new(seed),
            store: EmbeddingStore::new(EMBED_DIM),
        }
    }

    fn sentence(&mut self, f: &SentenceFeatures) -> String {
        let id = sentence_id(&render(f));
        if !self.store.contains(&id) {
            let v = self.embedder.embed(f, &id);
            self.store.insert(id.clone(), &v).expect("fresh id of the right dim");
        }
        id
    }

    pub fn next_episode(&mut self) -> SyntheticEpisode {
        let frame = *Frame::ALL.choose(&mut self.rng).unwrap();
        let lexemes = Lexemes::draw(&mut self.rng);
        let context: Vec<SentenceFeatures> = (0..CONTEXT_ROWS.len())
            .map(|row| match self.data_type {
                DataType::I => context_row(row, frame, lexemes),
                DataType::II => context_row(row, frame, Lexemes::draw(&mut self.rng)),
                DataType::III => {
                    let f = *Frame::ALL.choose(&mut self.rng).unwrap();
                    context_row(row, f, Lexemes::draw(&mut self.rng))
                }
            })
            .collect();
        let mut order = Category::ALL;
        order.shuffle(&mut self.rng);
        let last = context[context.len() - 1];
        let candidates: Vec<SentenceFeatures> = order.iter().map(|c| candidate(*c, last.frame, last.lexemes)).collect();
        let episode = BlmEpisode {
            data_type: self.data_type,
            context: context.iter().map(|f| self.sentence(f)).collect(),
            candidates: order
                .iter()
                .zip(&candidates)
                .map(|(c, f)| Candidate { id: self.sentence(f), category: *c })
                .collect(),
        };
        SyntheticEpisode { episode, context, candidates }
    }

    pub fn into_store(self) -> EmbeddingStore {
        self.store
    }
}

/// `n_episodes` episodes of one data type and the store covering them.
pub fn generate_synthetic(
    seed: u64,
    n_episodes: usize,
    data_type: DataType,
) -> Result<(Vec<BlmEpisode>, EmbeddingStore)> {
    if n_episodes == 0 {
        return Err(Error::Config("synthetic generation needs at least one episode".into()));
    }
    let mut g = SyntheticGenerator::new(seed, data_type);
    let episodes = (0..n_episodes).map(|_| g.next_episode().episode).collect();
    Ok((episodes, g.into_store()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rendering_matches_the_template_examples() {
        let lex = Lexemes { subject: 0, first: 0, second: 0, verb: 0 };
        let main = |c| render(&candidate(c, Frame::Main, lex));
        assert_eq!(main(Category::Correct), "Les ordinateurs avec les programmes de l'expérience sont en panne.");
        assert_eq!(main(Category::Coord), "L'ordinateur avec le programme et l'expérience est en panne.");
        assert_eq!(main(Category::Wna), "L'ordinateur avec le programme est en panne.");
        assert_eq!(
            render(&candidate(Category::Wn2, Frame::Relative, lex)),
            "Les ordinateurs avec les programmes des expériences dont Jean se servait sont en panne."
        );
        assert_eq!(
            render(&context_row(0, Frame::Completive, lex)),
            "Jean suppose que l'ordinateur avec le programme est en panne."
        );
    }

    #[test]
    fn candidates_break_their_named_rules() {
        let lex = Lexemes { subject: 1, first: 2, second: 3, verb: 4 };
        for c in Category::ALL {
            let v = violations(&candidate(c, Frame::Main, lex));
            match Rule::named_by(c) {
                None => assert!(v.is_empty(), "correct answer violates {v:?}"),
                Some(r) => assert!(v.contains(&r), "{c} keeps {r:?}"),
            }
            if matches!(c, Category::Ae | Category::Wn1 | Category::Wn2) {
                assert_eq!(v.len(), 1, "{c} violates {v:?}");
            }
        }
    }

    #[test]
    fn context_rows_follow_the_alternation() {
        let lex = Lexemes { subject: 0, first: 0, second: 0, verb: 0 };
        let subjects: Vec<Number> = (0..4).map(|r| context_row(r, Frame::Main, lex).subject).collect();
        assert_eq!(subjects, [Sg, Pl, Sg, Pl]);
        for r in 0..7 {
            assert!(Rule::Agreement.holds(&context_row(r, Frame::Main, lex)));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (e1, s1) = generate_synthetic(3, 20, DataType::II).unwrap();
        let (e2, s2) = generate_synthetic(3, 20, DataType::II).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(s1.encode(), s2.encode());
        let (e3, _) = generate_synthetic(4, 20, DataType::II).unwrap();
        assert_ne!(e1, e3);
    }

    #[test]
    fn identical_text_shares_one_vector() {
        let (eps, store) = generate_synthetic(1, 50, DataType::I).unwrap();
        for ep in &eps {
            ep.validate().unwrap();
            let wna = ep.candidates.iter().find(|c| c.category == Category::Wna).unwrap();
            // the wrong-attractor-count answer repeats context row 1 verbatim
            assert_eq!(wna.id, ep.context[0]);
        }
        assert!(store.len() < eps.len() * 13);
    }
}
