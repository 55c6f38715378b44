use crate::caching::FeatureVector;

pub const GENRE_COUNT: usize = 18;

/// Feature index order for movie genres.
pub const GENRES: [&str; GENRE_COUNT] = [
    "Action",
    "Adventure",
    "Animation",
    "Children",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

pub const NO_GENRES: &str = "(no genres listed)";

/// Tags that appear in the genre column of some releases but are not genres.
const IGNORED: [&str; 1] = ["IMAX"];

/// Index of a genre token. `Ok(None)` for known non-genre tags, `Err` with
/// the token for anything unrecognized.
pub fn genre_index(token: &str) -> Result<Option<usize>, String> {
    let token = token.trim();
    if token == "Children's" {
        return Ok(Some(3));
    }
    if let Some(i) = GENRES.iter().position(|g| *g == token) {
        return Ok(Some(i));
    }
    if IGNORED.contains(&token) {
        return Ok(None);
    }
    Err(token.to_string())
}

/// Parses a pipe-separated genre list into a feature vector.
pub fn genre_features(field: &str) -> Result<FeatureVector, String> {
    let mut f = FeatureVector::zeros(GENRE_COUNT);
    let field = field.trim();
    if field == NO_GENRES {
        return Ok(f);
    }
    for token in field.split('|') {
        if let Some(i) = genre_index(token)? {
            f.set(i);
        }
    }
    Ok(f)
}

pub fn genre_names(f: &FeatureVector) -> Vec<&'static str> {
    f.indices().filter_map(|i| GENRES.get(i).copied()).collect()
}
