use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lyricseq::checkpoint::{load_checkpoint, save_checkpoint};
use lyricseq::corpus::{
    build_vocab, count_tokens, examples_from_corpus, load_corpus, split_corpus, write_corpus, LoadOptions, Paragraph,
    TokenId, Tokenizer, Vocabulary, DEFAULT_MAX_SENTENCE_LEN, DEFAULT_MIN_COUNT, EOS_TOKEN,
};
use lyricseq::eval::{evaluate_model, write_report};
use lyricseq::gradcheck::{check_gradients, random_example};
use lyricseq::inference::{generate_paragraph, InferenceConfig, DEFAULT_BEAM_WIDTH, DEFAULT_MAX_DECODE_LEN};
use lyricseq::model::{Model, Variant};
use lyricseq::training::{train_with, TrainConfig};

mod config;
use config::ConfigFile;

/// Hierarchical attention sequence-to-sequence lyrics generator.
#[derive(Parser, Debug)]
#[command(name = "lyricseq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the vocabulary and split a corpus into train and test files.
    Preprocess(PreprocessArgs),
    /// Train a model and write a checkpoint plus a per-epoch loss log.
    Train(TrainArgs),
    /// Continue a seed line with generated sentences.
    Generate(GenerateArgs),
    /// Score next-sentence predictions on a held-out corpus with BLEU.
    Evaluate(EvaluateArgs),
    /// Check analytic gradients against finite differences on a small model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` file; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[command(flatten)]
    common: Common,
    /// Raw corpus: one sentence per line, blank lines between paragraphs.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory for vocab.txt, train.txt and test.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Minimum frequency for a word to enter the vocabulary [default: 10]
    #[arg(long)]
    min_count: Option<usize>,
    /// Sentences with more tokens are dropped [default: 20]
    #[arg(long)]
    max_sentence_len: Option<usize>,
    /// Fraction of paragraphs held out for testing [default: 0.1]
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Seed for the train/test shuffle [default: 0]
    #[arg(long)]
    rng_seed: Option<u64>,
    /// `whitespace` or `chars` (one token per character) [default: whitespace]
    #[arg(long)]
    tokenizer: Option<String>,
}

#[derive(Args, Debug)]
struct ModelFlags {
    /// Model variant: seq2seq, hred or hred_attention [default: hred_attention]
    #[arg(long)]
    variant: Option<Variant>,
    /// Size preset the other flags override: `full` or `desk` [default: full]
    #[arg(long)]
    preset: Option<String>,
    /// Word embedding size [default: 300]
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Word-level GRU hidden size [default: 1000]
    #[arg(long)]
    word_hidden: Option<usize>,
    /// Word-level GRU layers [default: 3]
    #[arg(long)]
    word_layers: Option<usize>,
    /// Sentence-level GRU hidden size [default: 1500]
    #[arg(long)]
    sent_hidden: Option<usize>,
    /// Decoder GRU hidden size; must equal --sent-hidden [default: 1500]
    #[arg(long)]
    dec_hidden: Option<usize>,
    /// Attention projection size [default: 1500]
    #[arg(long)]
    attn_dim: Option<usize>,
    /// Previous sentences fed to the encoder [default: 5]
    #[arg(long)]
    num_window: Option<usize>,
    /// Examples per mini-batch [default: 256]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Weights start uniform on [-r, r] [default: 0.5]
    #[arg(long)]
    init_range: Option<f64>,
    /// Adam step size [default: 0.001]
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Adam first-moment decay [default: 0.9]
    #[arg(long)]
    beta1: Option<f64>,
    /// Adam second-moment decay [default: 0.999]
    #[arg(long)]
    beta2: Option<f64>,
    /// Adam denominator offset [default: 1e-8]
    #[arg(long)]
    adam_epsilon: Option<f64>,
    /// Global gradient-norm ceiling, 0 to disable [default: 5]
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Epochs without a new best held-out loss before stopping [default: 3]
    #[arg(long)]
    patience: Option<usize>,
    /// Hard limit on epochs [default: 100]
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Seed for initialization and shuffling [default: 0]
    #[arg(long)]
    rng_seed: Option<u64>,
}

impl ModelFlags {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        fn s<T: ToString>(v: &Option<T>) -> Option<String> {
            v.as_ref().map(ToString::to_string)
        }
        vec![
            ("variant", s(&self.variant)),
            ("embed-dim", s(&self.embed_dim)),
            ("word-hidden", s(&self.word_hidden)),
            ("word-layers", s(&self.word_layers)),
            ("sent-hidden", s(&self.sent_hidden)),
            ("dec-hidden", s(&self.dec_hidden)),
            ("attn-dim", s(&self.attn_dim)),
            ("num-window", s(&self.num_window)),
            ("batch-size", s(&self.batch_size)),
            ("init-range", s(&self.init_range)),
            ("learning-rate", s(&self.learning_rate)),
            ("beta1", s(&self.beta1)),
            ("beta2", s(&self.beta2)),
            ("adam-epsilon", s(&self.adam_epsilon)),
            ("clip-norm", s(&self.clip_norm)),
            ("patience", s(&self.patience)),
            ("max-epochs", s(&self.max_epochs)),
            ("rng-seed", s(&self.rng_seed)),
        ]
    }

    /// Preset, then config file, then flags.
    fn resolve(&self, file: &ConfigFile) -> Result<TrainConfig> {
        let preset = file.pick(self.preset.clone(), "preset", "full".to_string())?;
        let mut config = match preset.as_str() {
            "full" => TrainConfig::default(),
            "desk" => TrainConfig::desk(),
            other => bail!("unknown preset {other:?} (expected full or desk)"),
        };
        for (k, v) in file.entries() {
            config.set(k, v)?;
        }
        for (k, v) in self.pairs() {
            if let Some(v) = v {
                config.set(k, &v)?;
            }
        }
        // the attention size follows the decoder unless set explicitly
        if self.attn_dim.is_none() && file.get("attn-dim").is_none() {
            config.attn_dim = config.dec_hidden;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Training corpus (e.g. train.txt from preprocess).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Held-out corpus for early stopping; without it the training loss is monitored.
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Vocabulary file from preprocess.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Where to write the checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Per-epoch `epoch<TAB>train<TAB>valid` log [default: <checkpoint>.loss.tsv]
    #[arg(long)]
    loss_log: Option<PathBuf>,
    #[command(flatten)]
    model: ModelFlags,
}

#[derive(Args, Debug)]
struct DecodeFlags {
    /// Beam width [default: 5]
    #[arg(long)]
    beam_width: Option<usize>,
    /// Longest generated sentence in tokens, counting the end symbol [default: 21]
    #[arg(long)]
    max_decode_len: Option<usize>,
    /// Length normalization exponent; 0 ranks by total log-probability [default: 0]
    #[arg(long)]
    length_norm_alpha: Option<f64>,
    /// Previous sentences fed to the encoder [default: the checkpoint's]
    #[arg(long)]
    num_window: Option<usize>,
}

impl DecodeFlags {
    fn resolve(&self, file: &ConfigFile, trained: &TrainConfig) -> Result<(InferenceConfig, usize)> {
        let cfg = InferenceConfig {
            beam_width: file.pick(self.beam_width, "beam-width", DEFAULT_BEAM_WIDTH)?,
            max_decode_len: file.pick(self.max_decode_len, "max-decode-len", DEFAULT_MAX_DECODE_LEN)?,
            length_norm_alpha: file.pick(self.length_norm_alpha, "length-norm-alpha", 0.0)?,
        };
        cfg.validate()?;
        let num_window = file.pick(self.num_window, "num-window", trained.num_window)?;
        if num_window == 0 {
            bail!("--num-window must be positive");
        }
        Ok((cfg, num_window))
    }
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// First line of the paragraph.
    #[arg(long)]
    seed_text: Option<String>,
    /// Sentences to generate after the seed [default: 4]
    #[arg(long)]
    sentences: Option<usize>,
    /// `whitespace` or `chars`, applied to the seed [default: whitespace]
    #[arg(long)]
    tokenizer: Option<String>,
    #[command(flatten)]
    decode: DecodeFlags,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Held-out corpus (e.g. test.txt from preprocess).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Report file, one `name<TAB>value` line per metric.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Generated sentences in corpus format [default: <out>.generations.txt]
    #[arg(long)]
    generations: Option<PathBuf>,
    #[command(flatten)]
    decode: DecodeFlags,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[command(flatten)]
    common: Common,
    /// Variant to check; all three when omitted.
    #[arg(long)]
    variant: Option<Variant>,
    /// Vocabulary size of the random model [default: 30]
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Central-difference step [default: 1e-5]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Largest acceptable relative error [default: 1e-4]
    #[arg(long)]
    tolerance: Option<f64>,
    /// Seed for the random model and example [default: 0]
    #[arg(long)]
    rng_seed: Option<u64>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_tokenizer(name: &str) -> Result<Tokenizer> {
    match name {
        "whitespace" => Ok(Tokenizer::Whitespace),
        "chars" => Ok(Tokenizer::Chars),
        other => bail!("unknown tokenizer {other:?} (expected whitespace or chars)"),
    }
}

fn read_corpus(path: &Path, opts: LoadOptions) -> Result<Vec<Paragraph>> {
    let f = File::open(path).with_context(|| format!("opening corpus {}", path.display()))?;
    load_corpus(BufReader::new(f), opts).with_context(|| format!("reading corpus {}", path.display()))
}

fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let f = File::open(path).with_context(|| format!("opening vocabulary {}", path.display()))?;
    Vocabulary::read(BufReader::new(f)).with_context(|| format!("reading vocabulary {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn preprocess(args: PreprocessArgs) -> Result<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let corpus: PathBuf = file.require(args.corpus, "corpus")?;
    let out: PathBuf = file.require(args.out, "out")?;
    let min_count = file.pick(args.min_count, "min-count", DEFAULT_MIN_COUNT)?;
    let max_len = file.pick(args.max_sentence_len, "max-sentence-len", DEFAULT_MAX_SENTENCE_LEN)?;
    let test_fraction = file.pick(args.test_fraction, "test-fraction", 0.1)?;
    let seed = file.pick(args.rng_seed, "rng-seed", 0)?;
    let tokenizer = parse_tokenizer(&file.pick(args.tokenizer, "tokenizer", "whitespace".into())?)?;

    let paragraphs = read_corpus(
        &corpus,
        LoadOptions {
            tokenizer,
            max_sentence_len: max_len,
        },
    )?;
    if paragraphs.is_empty() {
        bail!("{} contains no sentences", corpus.display());
    }
    let distinct = count_tokens(&paragraphs).len();
    let vocab = build_vocab(&paragraphs, min_count)?;
    let (train, test) = split_corpus(&paragraphs, 1.0 - test_fraction, seed)?;

    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = create(&out.join("vocab.txt"))?;
    vocab.write(&mut w)?;
    w.flush()?;
    for (name, part) in [("train.txt", &train), ("test.txt", &test)] {
        let mut w = create(&out.join(name))?;
        write_corpus(&mut w, part)?;
        w.flush()?;
    }
    println!("paragraphs\t{}", paragraphs.len());
    println!("train_paragraphs\t{}", train.len());
    println!("test_paragraphs\t{}", test.len());
    println!("distinct_tokens\t{distinct}");
    println!("vocab_size\t{}", vocab.len());
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let corpus: PathBuf = file.require(args.corpus, "corpus")?;
    let vocab_path: PathBuf = file.require(args.vocab, "vocab")?;
    let checkpoint: PathBuf = file.require(args.checkpoint, "checkpoint")?;
    let valid: Option<PathBuf> = file.pick_opt(args.valid, "valid")?;
    let loss_log = file.pick(args.loss_log, "loss-log", with_suffix(&checkpoint, ".loss.tsv"))?;
    let config = args.model.resolve(&file)?;

    let vocab = read_vocab(&vocab_path)?;
    let train_set = examples_from_corpus(&read_corpus(&corpus, LoadOptions::default())?, config.num_window, &vocab);
    if train_set.is_empty() {
        bail!("{} yields no training examples (paragraphs need at least two sentences)", corpus.display());
    }
    let valid_set = match &valid {
        Some(p) => examples_from_corpus(&read_corpus(p, LoadOptions::default())?, config.num_window, &vocab),
        None => Vec::new(),
    };
    eprintln!(
        "training {} on {} examples ({} held out), vocabulary {}",
        config.variant,
        train_set.len(),
        valid_set.len(),
        vocab.len()
    );

    let mut log = create(&loss_log)?;
    writeln!(log, "epoch\ttrain_loss\tvalid_loss")?;
    let mut io_err = None;
    let ck = train_with(&config, vocab.len(), &train_set, &valid_set, |r| {
        eprintln!("epoch {:>3}  train {:.5}  valid {:.5}", r.epoch, r.train_loss, r.valid_loss);
        if let Err(e) = writeln!(log, "{}\t{}\t{}", r.epoch, r.train_loss, r.valid_loss) {
            io_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing loss log");
    }
    log.flush()?;
    save_checkpoint(&checkpoint, &ck).with_context(|| format!("writing {}", checkpoint.display()))?;
    eprintln!("best epoch {} of {}; saved {}", ck.epoch, ck.history.len(), checkpoint.display());
    Ok(())
}

/// Decoded words; an empty sentence prints as the end symbol so it cannot be
/// mistaken for a paragraph break.
fn printable(vocab: &Vocabulary, ids: &[TokenId]) -> Vec<String> {
    if ids.is_empty() {
        vec![EOS_TOKEN.to_string()]
    } else {
        vocab.decode(ids)
    }
}

fn load_model(path: &Path, vocab: &Vocabulary) -> Result<(Model, TrainConfig)> {
    let ck = load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
    if ck.model.vocab_size() != vocab.len() {
        bail!(
            "checkpoint expects a vocabulary of {} entries but {} has {}",
            ck.model.vocab_size(),
            path.display(),
            vocab.len()
        );
    }
    Ok((ck.model, ck.config))
}

fn generate(args: GenerateArgs) -> Result<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let checkpoint: PathBuf = file.require(args.checkpoint, "checkpoint")?;
    let vocab = read_vocab(&file.require::<PathBuf>(args.vocab, "vocab")?)?;
    let seed_text: String = file.require(args.seed_text, "seed-text")?;
    let sentences = file.pick(args.sentences, "sentences", 4)?;
    let tokenizer = parse_tokenizer(&file.pick(args.tokenizer, "tokenizer", "whitespace".into())?)?;
    let (model, trained) = load_model(&checkpoint, &vocab)?;
    let (cfg, num_window) = args.decode.resolve(&file, &trained)?;

    let seed_tokens = tokenizer.tokenize(&seed_text);
    if seed_tokens.is_empty() {
        bail!("--seed-text is empty");
    }
    let seed: Vec<_> = seed_tokens.iter().map(|t| vocab.id(t)).collect();
    let paragraph = generate_paragraph(&model, &seed, sentences, num_window, &cfg)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "{}", seed_tokens.join(" "))?;
    for s in &paragraph[1..] {
        writeln!(out, "{}", printable(&vocab, s).join(" "))?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let checkpoint: PathBuf = file.require(args.checkpoint, "checkpoint")?;
    let vocab = read_vocab(&file.require::<PathBuf>(args.vocab, "vocab")?)?;
    let corpus: PathBuf = file.require(args.corpus, "corpus")?;
    let out: PathBuf = file.require(args.out, "out")?;
    let generations = file.pick(args.generations, "generations", with_suffix(&out, ".generations.txt"))?;
    let (model, trained) = load_model(&checkpoint, &vocab)?;
    let (cfg, num_window) = args.decode.resolve(&file, &trained)?;

    let examples = examples_from_corpus(&read_corpus(&corpus, LoadOptions::default())?, num_window, &vocab);
    if examples.is_empty() {
        bail!("{} yields no test examples", corpus.display());
    }
    let evaluation = evaluate_model(&model, &examples, &cfg)?;
    let mut w = create(&out)?;
    write_report(
        &mut w,
        &evaluation.report,
        &[
            ("examples", examples.len().to_string()),
            ("variant", model.variant.to_string()),
            ("beam_width", cfg.beam_width.to_string()),
        ],
    )?;
    w.flush()?;

    // each example becomes a paragraph: its context, then the prediction
    let paragraphs: Vec<Paragraph> = examples
        .iter()
        .zip(&evaluation.predictions)
        .map(|(ex, pred)| {
            let mut sentences: Vec<_> = ex.context.iter().map(|s| vocab.decode(&s[1..s.len() - 1])).collect();
            sentences.push(printable(&vocab, pred));
            Paragraph::new(sentences)
        })
        .collect();
    let mut w = create(&generations)?;
    write_corpus(&mut w, &paragraphs)?;
    w.flush()?;
    println!("bleu\t{}", evaluation.report.bleu);
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<bool> {
    let file = ConfigFile::load(args.common.config.as_deref())?;
    let vocab_size = file.pick(args.vocab_size, "vocab-size", 30)?;
    let epsilon = file.pick(args.epsilon, "epsilon", 1e-5)?;
    let tolerance = file.pick(args.tolerance, "tolerance", 1e-4)?;
    let seed = file.pick(args.rng_seed, "rng-seed", 0)?;
    let variants = match file.pick_opt(args.variant, "variant")? {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    if vocab_size < 4 {
        bail!("--vocab-size must be at least 4");
    }

    let mut report = String::new();
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for variant in variants {
        let config = TrainConfig {
            variant,
            ..TrainConfig::desk()
        };
        let model = Model::random(variant, config.model_dims(vocab_size), config.init_range, &mut rng)?;
        let example = random_example(vocab_size, config.num_window, 6, &mut rng);
        for t in check_gradients(&model, &example, epsilon)? {
            let verdict = if t.max_relative_error < tolerance { "ok" } else { "FAIL" };
            report.push_str(&format!(
                "{variant}\t{}\t{}\t{:.3e}\t{verdict}\n",
                t.name, t.params, t.max_relative_error
            ));
            worst = worst.max(t.max_relative_error);
        }
    }
    let pass = worst < tolerance;
    report.push_str(&format!(
        "max_relative_error\t{worst:.3e}\ntolerance\t{tolerance:e}\nresult\t{}\n",
        if pass { "pass" } else { "fail" }
    ));
    print!("{report}");
    if let Some(path) = file.pick_opt(args.out, "out")? {
        std::fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(a) => preprocess(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Generate(a) => generate(a).map(|_| true),
        Command::Evaluate(a) => evaluate(a).map(|_| true),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
