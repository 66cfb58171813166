//! Implicit-feedback interactions, the unbiased split, and the user–item
//! bipartite graph with its normalized operators.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result, TspError};
use crate::sparse::CsrMatrix;

pub type Interaction = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionFormat {
    Csv,
    Tsv,
}

impl InteractionFormat {
    fn delimiter(self) -> u8 {
        match self {
            InteractionFormat::Csv => b',',
            InteractionFormat::Tsv => b'\t',
        }
    }

    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => InteractionFormat::Tsv,
            _ => InteractionFormat::Csv,
        }
    }
}

/// Maps dense indices back to the raw ids found in the source file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdMaps {
    pub users: Vec<i64>,
    pub items: Vec<i64>,
}

impl IdMaps {
    pub fn user_index(&self) -> BTreeMap<i64, usize> {
        self.users.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }

    pub fn item_index(&self) -> BTreeMap<i64, usize> {
        self.items.iter().enumerate().map(|(i, &id)| (id, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<Interaction>,
    pub valid: Vec<Interaction>,
    pub test: Vec<Interaction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub num_users: usize,
    pub num_items: usize,
    /// Sorted and deduplicated.
    pub interactions: Vec<Interaction>,
    pub splits: Option<Splits>,
    /// Train-split counts once split, counts over all interactions before.
    pub item_popularity: Vec<usize>,
    pub id_maps: Option<IdMaps>,
}

fn popularity(num_items: usize, pairs: &[Interaction]) -> Vec<usize> {
    let mut pop = vec![0usize; num_items];
    for &(_, i) in pairs {
        pop[i] += 1;
    }
    pop
}

impl InteractionDataset {
    /// Builds an unsplit dataset from index pairs, deduplicating them.
    pub fn new(num_users: usize, num_items: usize, pairs: impl IntoIterator<Item = Interaction>) -> Result<Self> {
        let set: BTreeSet<Interaction> = pairs.into_iter().collect();
        if let Some(&(u, i)) = set.iter().find(|&&(u, i)| u >= num_users || i >= num_items) {
            return Err(TspError::Shape(format!(
                "interaction ({u}, {i}) outside {num_users} users x {num_items} items"
            )));
        }
        let interactions: Vec<Interaction> = set.into_iter().collect();
        Ok(Self {
            num_users,
            num_items,
            item_popularity: popularity(num_items, &interactions),
            interactions,
            splits: None,
            id_maps: None,
        })
    }

    /// Rebuilds a split dataset from explicit partitions (e.g. a manifest).
    pub fn from_splits(num_users: usize, num_items: usize, splits: Splits, id_maps: Option<IdMaps>) -> Result<Self> {
        let all = splits
            .train
            .iter()
            .chain(&splits.valid)
            .chain(&splits.test)
            .copied();
        let mut ds = Self::new(num_users, num_items, all)?;
        let total = splits.train.len() + splits.valid.len() + splits.test.len();
        if ds.interactions.len() != total {
            return Err(TspError::Format(
                "split partitions overlap or contain duplicates".into(),
            ));
        }
        ds.item_popularity = popularity(num_items, &splits.train);
        ds.splits = Some(splits);
        ds.id_maps = id_maps;
        Ok(ds)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn split(&self, kind: SplitKind) -> Option<&[Interaction]> {
        self.splits.as_ref().map(|s| match kind {
            SplitKind::Train => s.train.as_slice(),
            SplitKind::Valid => s.valid.as_slice(),
            SplitKind::Test => s.test.as_slice(),
        })
    }

    pub fn train(&self) -> Option<&[Interaction]> {
        self.split(SplitKind::Train)
    }

    /// Per-user sorted item lists of one split.
    pub fn user_items(&self, kind: SplitKind) -> Result<Vec<Vec<usize>>> {
        let pairs = self
            .split(kind)
            .ok_or_else(|| TspError::Config("dataset has not been split".into()))?;
        let mut per_user = vec![Vec::new(); self.num_users];
        for &(u, i) in pairs {
            per_user[u].push(i);
        }
        per_user.iter_mut().for_each(|v| v.sort_unstable());
        Ok(per_user)
    }
}

fn parse_id(field: &str, path: &Path, line: u64) -> Result<i64> {
    field.trim().parse::<i64>().map_err(|_| TspError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("expected an integer id, found {field:?}"),
    })
}

/// Reads a two-column user/item id file. A non-numeric first row is treated
/// as a header. Ids are densified in ascending raw-id order.
pub fn load_interactions(path: &Path, format: InteractionFormat) -> Result<InteractionDataset> {
    let file = File::open(path).map_err(|e| TspError::io(format!("opening {}", path.display()), e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(format.delimiter())
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(BufReader::new(file));

    let mut raw: Vec<(i64, i64)> = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| TspError::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() < 2 {
            return Err(TspError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected two columns, found {}", record.len()),
            });
        }
        let looks_like_header = n == 0 && record[0].trim().parse::<i64>().is_err() && record[1].trim().parse::<i64>().is_err();
        if looks_like_header {
            continue;
        }
        raw.push((parse_id(&record[0], path, line)?, parse_id(&record[1], path, line)?));
    }
    if raw.is_empty() {
        return Err(TspError::EmptyDataset(path.display().to_string()));
    }

    let users: Vec<i64> = raw.iter().map(|r| r.0).collect::<BTreeSet<_>>().into_iter().collect();
    let items: Vec<i64> = raw.iter().map(|r| r.1).collect::<BTreeSet<_>>().into_iter().collect();
    let maps = IdMaps { users, items };
    let (user_index, item_index) = (maps.user_index(), maps.item_index());
    let pairs = raw.iter().map(|(u, i)| (user_index[u], item_index[i]));
    let mut ds = InteractionDataset::new(maps.users.len(), maps.items.len(), pairs)?;
    ds.id_maps = Some(maps);
    Ok(ds)
}

/// Uniform split over distinct interactions: a seeded shuffle, then the first
/// `round(train_frac·n)` go to train, the next `round(valid_frac·n)` to
/// validation and the rest to test.
pub fn unbiased_split(
    dataset: &InteractionDataset,
    train_frac: f64,
    valid_frac: f64,
    seed: u64,
) -> Result<InteractionDataset> {
    let in_unit = |f: f64| f > 0.0 && f < 1.0;
    if !in_unit(train_frac) || !in_unit(valid_frac) {
        return config_err(format!(
            "split fractions must lie in (0, 1), got train={train_frac} valid={valid_frac}"
        ));
    }
    if train_frac + valid_frac >= 1.0 {
        return config_err(format!(
            "train + valid fractions must be < 1, got {}",
            train_frac + valid_frac
        ));
    }
    if dataset.splits.is_some() {
        return config_err("dataset is already split");
    }
    let n = dataset.interactions.len();
    let n_train = ((train_frac * n as f64).round() as usize).min(n);
    let n_valid = ((valid_frac * n as f64).round() as usize).min(n - n_train);

    let mut shuffled = dataset.interactions.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let mut train = shuffled[..n_train].to_vec();
    let mut valid = shuffled[n_train..n_train + n_valid].to_vec();
    let mut test = shuffled[n_train + n_valid..].to_vec();
    train.sort_unstable();
    valid.sort_unstable();
    test.sort_unstable();

    let mut out = dataset.clone();
    out.item_popularity = popularity(dataset.num_items, &train);
    out.splits = Some(Splits { train, valid, test });
    Ok(out)
}

/// The `⌊fraction·num_items⌋` least popular items (train counts), ties broken
/// by ascending index. Returned sorted by index.
pub fn tail_items(dataset: &InteractionDataset, fraction: f64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return config_err(format!("tail fraction must lie in (0, 1], got {fraction}"));
    }
    if dataset.splits.is_none() {
        return config_err("tail items require a train split");
    }
    let count = (fraction * dataset.num_items as f64).floor() as usize;
    let mut order: Vec<usize> = (0..dataset.num_items).collect();
    order.sort_by_key(|&i| (dataset.item_popularity[i], i));
    let mut tail = order[..count].to_vec();
    tail.sort_unstable();
    Ok(tail)
}

/// Row counts of the node index space: users first, then items.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub num_users: usize,
    pub num_items: usize,
}

impl NodeLayout {
    pub fn num_nodes(&self) -> usize {
        self.num_users + self.num_items
    }

    pub fn item_node(&self, item: usize) -> usize {
        self.num_users + item
    }
}

#[derive(Debug, Clone)]
pub struct BipartiteGraph {
    pub layout: NodeLayout,
    pub adjacency: CsrMatrix<f64>,
    pub degrees: Vec<usize>,
    pub normalized_adjacency: CsrMatrix<f64>,
    pub normalized_laplacian: CsrMatrix<f64>,
}

impl BipartiteGraph {
    /// Builds the operators from undirected edges over `layout.num_nodes()`
    /// nodes. Self-loops and duplicates are ignored. Edges need not respect
    /// the user/item bipartition, which lets diagnostics run on any graph.
    pub fn from_edges(layout: NodeLayout, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = layout.num_nodes();
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(TspError::Shape(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            if a != b {
                set.insert((a.min(b), a.max(b)));
            }
        }
        let mut triplets = Vec::with_capacity(2 * set.len());
        let mut degrees = vec![0usize; n];
        for &(a, b) in &set {
            triplets.push((a, b, 1.0));
            triplets.push((b, a, 1.0));
            degrees[a] += 1;
            degrees[b] += 1;
        }
        let adjacency = CsrMatrix::from_triplets(n, n, &triplets);

        // D^{-1/2} with 0 for isolated nodes.
        let inv_sqrt: Vec<f64> = degrees
            .iter()
            .map(|&d| if d == 0 { 0.0 } else { 1.0 / (d as f64).sqrt() })
            .collect();
        let norm_triplets: Vec<_> = triplets
            .iter()
            .map(|&(a, b, _)| (a, b, inv_sqrt[a] * inv_sqrt[b]))
            .collect();
        let normalized_adjacency = CsrMatrix::from_triplets(n, n, &norm_triplets);

        let mut lap_triplets: Vec<_> = norm_triplets.iter().map(|&(a, b, v)| (a, b, -v)).collect();
        lap_triplets.extend((0..n).map(|v| (v, v, 1.0)));
        let normalized_laplacian = CsrMatrix::from_triplets(n, n, &lap_triplets);

        Ok(Self {
            layout,
            adjacency,
            degrees,
            normalized_adjacency,
            normalized_laplacian,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.layout.num_nodes()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency.row(v).map(|(c, _)| c)
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.nnz() / 2
    }
}

/// User–item graph over the train split: `A[u, U+i] = A[U+i, u] = 1`.
pub fn build_bipartite_graph(dataset: &InteractionDataset) -> Result<BipartiteGraph> {
    let train = dataset
        .train()
        .ok_or_else(|| TspError::Config("the bipartite graph is built from the train split; split the dataset first".into()))?;
    let layout = NodeLayout {
        num_users: dataset.num_users,
        num_items: dataset.num_items,
    };
    BipartiteGraph::from_edges(layout, train.iter().map(|&(u, i)| (u, layout.item_node(i))))
}

/// JSON split manifest: `{"train": [[u,i],...], "valid": [...], "test": [...], "id_maps": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub num_users: usize,
    pub num_items: usize,
    pub train: Vec<Interaction>,
    pub valid: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub id_maps: SerializedIdMaps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Raw id → dense index, keyed by the raw id as a string for JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SerializedIdMaps {
    pub users: BTreeMap<String, usize>,
    pub items: BTreeMap<String, usize>,
}

impl SplitManifest {
    pub fn from_dataset(dataset: &InteractionDataset) -> Result<Self> {
        let splits = dataset
            .splits
            .clone()
            .ok_or_else(|| TspError::Config("cannot write a manifest for an unsplit dataset".into()))?;
        let id_maps = match &dataset.id_maps {
            Some(m) => SerializedIdMaps {
                users: m.users.iter().enumerate().map(|(i, id)| (id.to_string(), i)).collect(),
                items: m.items.iter().enumerate().map(|(i, id)| (id.to_string(), i)).collect(),
            },
            None => SerializedIdMaps::default(),
        };
        Ok(Self {
            num_users: dataset.num_users,
            num_items: dataset.num_items,
            train: splits.train,
            valid: splits.valid,
            test: splits.test,
            id_maps,
            config_hash: None,
        })
    }

    pub fn into_dataset(self) -> Result<InteractionDataset> {
        let id_maps = if self.id_maps.users.is_empty() && self.id_maps.items.is_empty() {
            None
        } else {
            let invert = |m: &BTreeMap<String, usize>, len: usize| -> Result<Vec<i64>> {
                let mut out = vec![0i64; len];
                for (raw, &idx) in m {
                    let id = raw
                        .parse::<i64>()
                        .map_err(|_| TspError::Format(format!("non-integer raw id {raw:?} in id map")))?;
                    *out.get_mut(idx)
                        .ok_or_else(|| TspError::Format(format!("id map index {idx} out of range")))? = id;
                }
                Ok(out)
            };
            Some(IdMaps {
                users: invert(&self.id_maps.users, self.num_users)?,
                items: invert(&self.id_maps.items, self.num_items)?,
            })
        };
        InteractionDataset::from_splits(
            self.num_users,
            self.num_items,
            Splits {
                train: self.train,
                valid: self.valid,
                test: self.test,
            },
            id_maps,
        )
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| TspError::io(format!("creating {}", path.display()), e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| TspError::io(format!("opening {}", path.display()), e))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}
