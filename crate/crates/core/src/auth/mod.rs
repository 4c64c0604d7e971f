//! Three-party authentication.
//!
//! Provisioning: a manufacturer and a government authority each hold a
//! secret (`S_m`, `S_g`). A vehicle is provisioned with a challenge and
//! response pair derived from both secrets keyed to its UUID, so minting
//! a credential for any identity requires both secrets. Only hashed
//! derivations ever leave the authority.
//!
//! Rounds: the authorities periodically refresh a *round signature* — a
//! composite hash binding (round number, round nonce, both secrets) — and
//! distribute it to road-side units. An RSU issues short-lived tokens to
//! vehicles in radio range that present a valid credential: the token
//! challenge/response embed the secret round signature as an additive
//! summand, and the pair is encrypted to the vehicle's public key.
//!
//! Peer verification: a broadcast carries the sender's token challenge.
//! Because challenge and response for the same round contain the same
//! round-signature summand, a receiver subtracts its *own* response token
//! and compares against a publicly computable basis difference — no
//! secret material crosses the air, and tokens from the current or the
//! immediately preceding round verify. Nonces stop replays.

mod hash;
mod keys;

pub use hash::{compose_hash, CompositeHash, HashError, LANES};
pub use keys::{seal_to, KeyPair, PublicKey, SealedBox};

use crate::geometry::Vec2;
use crate::wire::{Reader, WireError, Writer};
use rand::{CryptoRng, Rng, RngCore};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub const CREDENTIAL_VERSION: u8 = 1;
pub const TOKEN_VERSION: u8 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum AuthError {
    #[error("UUID already provisioned")]
    DuplicateUuid,
    #[error("round signature refresh requested {age:.3}s after issue, expiration is {expiration:.3}s")]
    PrematureRefresh { age: f64, expiration: f64 },
    #[error("vehicle outside RSU range")]
    OutOfRange,
    #[error("credential invalid")]
    InvalidCredential,
    #[error("request signature invalid")]
    BadSignature,
    #[error("nonce already seen")]
    ReplayedNonce,
    #[error("RSU holds no round signature")]
    NoRoundSignature,
}

/// Why a peer broadcast was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Token challenge does not verify for the claimed identity/round.
    InvalidChallenge,
    /// Token bound to a round at least two behind the verifier's.
    ExpiredToken,
    /// Token claims a round ahead of the verifier's.
    FutureRound,
    /// Nonce was already seen.
    Replay,
    /// Verifier holds no token for the claimed round.
    NoLocalToken,
}

/// Protocol timing and radio parameters.
#[derive(Debug, Clone)]
pub struct AuthConfig {
    /// Round signature lifetime, seconds.
    pub expiration_s: f64,
    /// Fraction of the lifetime after which a holder renews its token.
    pub renewal_fraction: f64,
    /// How long seen nonces are retained, seconds.
    pub nonce_retention_s: f64,
    /// RSU radio range, meters.
    pub rsu_range_m: f64,
}

impl Default for AuthConfig {
    fn default() -> Self {
        AuthConfig {
            expiration_s: 60.0,
            renewal_fraction: 0.9,
            nonce_retention_s: 120.0,
            rsu_range_m: 50.0,
        }
    }
}

/// Stable identity hash broadcast in place of the raw UUID.
pub fn id_hash(uuid: &[u8; 16]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"participant-id");
    h.update(uuid);
    h.finalize().into()
}

fn token_chal_basis(id: &[u8; 32], round: u64) -> CompositeHash {
    let mut part = Vec::with_capacity(8 + 32 + 8);
    part.extend_from_slice(b"tok-chal");
    part.extend_from_slice(id);
    part.extend_from_slice(&round.to_le_bytes());
    CompositeHash::of_part(&part)
}

fn token_resp_basis(id: &[u8; 32], round: u64) -> CompositeHash {
    let mut part = Vec::with_capacity(8 + 32 + 8);
    part.extend_from_slice(b"tok-resp");
    part.extend_from_slice(id);
    part.extend_from_slice(&round.to_le_bytes());
    CompositeHash::of_part(&part)
}

/// Joint manufacturer + government secrets. Never serialized; only
/// composite-hash derivations leave this struct.
pub struct AuthorityKeys {
    s_g: [u8; 32],
    s_m: [u8; 32],
}

impl std::fmt::Debug for AuthorityKeys {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AuthorityKeys(..)")
    }
}

/// The provisioning and round-signing side of the protocol.
#[derive(Debug)]
pub struct Authority {
    keys: AuthorityKeys,
    provisioned: BTreeSet<[u8; 16]>,
}

impl Authority {
    pub fn new<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        Authority {
            keys: AuthorityKeys {
                s_g: rng.gen(),
                s_m: rng.gen(),
            },
            provisioned: BTreeSet::new(),
        }
    }

    /// Exposes the raw secrets to tests that scan serialized artifacts
    /// for leakage.
    pub fn secret_material(&self) -> ([u8; 32], [u8; 32]) {
        (self.keys.s_m, self.keys.s_g)
    }

    fn derive(&self, domain: &[u8], context: &[u8]) -> CompositeHash {
        let mut public_part = Vec::new();
        public_part.extend_from_slice(domain);
        public_part.extend_from_slice(context);

        let mut m_part = Vec::new();
        m_part.extend_from_slice(domain);
        m_part.extend_from_slice(b"/mnf");
        m_part.extend_from_slice(&self.keys.s_m);
        m_part.extend_from_slice(context);

        let mut g_part = Vec::new();
        g_part.extend_from_slice(domain);
        g_part.extend_from_slice(b"/gov");
        g_part.extend_from_slice(&self.keys.s_g);
        g_part.extend_from_slice(context);

        compose_hash(&[&public_part, &m_part, &g_part]).expect("non-empty parts")
    }

    fn credential_chal(&self, uuid: &[u8; 16]) -> CompositeHash {
        self.derive(b"cred-chal", uuid)
    }

    fn credential_resp(&self, uuid: &[u8; 16]) -> CompositeHash {
        self.derive(b"cred-resp", uuid)
    }

    /// Provisions a new vehicle identity. The keypair is generated on the
    /// vehicle; the authority only learns the UUID.
    pub fn provision_vehicle<R: RngCore + CryptoRng>(
        &mut self,
        uuid: [u8; 16],
        rng: &mut R,
    ) -> Result<VehicleCredential, AuthError> {
        if !self.provisioned.insert(uuid) {
            return Err(AuthError::DuplicateUuid);
        }
        Ok(VehicleCredential {
            uuid,
            keypair: KeyPair::generate(rng),
            chal: self.credential_chal(&uuid),
            resp: self.credential_resp(&uuid),
        })
    }

    /// Checks a presented credential challenge against the secrets.
    pub fn verify_credential(&self, uuid: &[u8; 16], chal: &CompositeHash) -> bool {
        self.credential_chal(uuid) == *chal
    }

    fn expected_resp_proof(&self, uuid: &[u8; 16], nonce: &[u8; 16]) -> [u8; 32] {
        resp_proof(&self.credential_resp(uuid), nonce)
    }

    /// Issues the first round signature of a run.
    pub fn initial_round_signature<R: RngCore + CryptoRng>(
        &self,
        now: f64,
        rng: &mut R,
    ) -> RoundSignature {
        self.make_signature(1, rng.gen(), now)
    }

    /// Refreshes an aged-out round signature; refusing early refreshes
    /// keeps the round counter aligned with wall time.
    pub fn refresh_round_signature<R: RngCore + CryptoRng>(
        &self,
        prev: &RoundSignature,
        now: f64,
        expiration_s: f64,
        rng: &mut R,
    ) -> Result<RoundSignature, AuthError> {
        let age = now - prev.issued_at;
        if age <= expiration_s {
            return Err(AuthError::PrematureRefresh {
                age,
                expiration: expiration_s,
            });
        }
        Ok(self.make_signature(prev.round_num + 1, rng.gen(), now))
    }

    fn make_signature(&self, round_num: u64, uuid_r: [u8; 16], now: f64) -> RoundSignature {
        let mut context = Vec::with_capacity(24);
        context.extend_from_slice(&round_num.to_le_bytes());
        context.extend_from_slice(&uuid_r);
        RoundSignature {
            round_num,
            uuid_r,
            sig: self.derive(b"round-sig", &context),
            issued_at: now,
        }
    }
}

fn resp_proof(resp: &CompositeHash, nonce: &[u8; 16]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(b"resp-proof");
    h.update(resp.to_bytes());
    h.update(nonce);
    h.finalize().into()
}

/// Long-lived per-vehicle material from provisioning.
#[derive(Debug, Clone)]
pub struct VehicleCredential {
    pub uuid: [u8; 16],
    pub keypair: KeyPair,
    pub chal: CompositeHash,
    pub resp: CompositeHash,
}

impl VehicleCredential {
    pub fn id_hash(&self) -> [u8; 32] {
        id_hash(&self.uuid)
    }

    /// Serializes the stored record (public parts; the private keys live
    /// in the keystore, not the record).
    pub fn record_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(CREDENTIAL_VERSION);
        w.put_bytes(&self.uuid);
        w.put_bytes(&self.keypair.public().to_bytes());
        w.put_bytes(&self.chal.to_bytes());
        w.put_bytes(&self.resp.to_bytes());
        w.finish()
    }

    pub fn record_from_bytes(bytes: &[u8]) -> Result<CredentialRecord, WireError> {
        let mut r = Reader::new(bytes);
        r.expect_version(CREDENTIAL_VERSION)?;
        let uuid: [u8; 16] = r
            .take_bytes()?
            .try_into()
            .map_err(|_| WireError::Invalid("uuid"))?;
        let pk: [u8; 64] = r
            .take_bytes()?
            .try_into()
            .map_err(|_| WireError::Invalid("public key"))?;
        let chal: [u8; 64] = r
            .take_bytes()?
            .try_into()
            .map_err(|_| WireError::Invalid("challenge"))?;
        let resp: [u8; 64] = r
            .take_bytes()?
            .try_into()
            .map_err(|_| WireError::Invalid("response"))?;
        r.finish()?;
        Ok(CredentialRecord {
            uuid,
            public_key: PublicKey::from_bytes(&pk),
            chal: CompositeHash::from_bytes(&chal),
            resp: CompositeHash::from_bytes(&resp),
        })
    }
}

/// Decoded credential record.
#[derive(Debug, Clone, PartialEq)]
pub struct CredentialRecord {
    pub uuid: [u8; 16],
    pub public_key: PublicKey,
    pub chal: CompositeHash,
    pub resp: CompositeHash,
}

/// Periodically refreshed joint signature scoping token validity.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSignature {
    pub round_num: u64,
    pub uuid_r: [u8; 16],
    pub sig: CompositeHash,
    pub issued_at: f64,
}

/// Ephemeral per-participant token issued by an RSU.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundToken {
    pub chal_t: CompositeHash,
    pub resp_t: CompositeHash,
    pub bound_round: u64,
    pub issued_at: f64,
}

impl RoundToken {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(TOKEN_VERSION);
        w.put_bytes(&self.chal_t.to_bytes());
        w.put_bytes(&self.resp_t.to_bytes());
        w.put_u64(self.bound_round);
        w.put_f64(self.issued_at);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        r.expect_version(TOKEN_VERSION)?;
        let chal: [u8; 64] = r
            .take_bytes()?
            .try_into()
            .map_err(|_| WireError::Invalid("token challenge"))?;
        let resp: [u8; 64] = r
            .take_bytes()?
            .try_into()
            .map_err(|_| WireError::Invalid("token response"))?;
        let bound_round = r.take_u64()?;
        let issued_at = r.take_f64()?;
        r.finish()?;
        Ok(RoundToken {
            chal_t: CompositeHash::from_bytes(&chal),
            resp_t: CompositeHash::from_bytes(&resp),
            bound_round,
            issued_at,
        })
    }
}

/// The tokens a participant currently holds, newest rounds last.
#[derive(Debug, Default, Clone)]
pub struct TokenWallet {
    tokens: BTreeMap<u64, RoundToken>,
}

impl TokenWallet {
    pub fn insert(&mut self, token: RoundToken) {
        self.tokens.insert(token.bound_round, token);
        while self.tokens.len() > 3 {
            let oldest = *self.tokens.keys().next().unwrap();
            self.tokens.remove(&oldest);
        }
    }

    pub fn get(&self, round: u64) -> Option<&RoundToken> {
        self.tokens.get(&round)
    }

    pub fn latest(&self) -> Option<&RoundToken> {
        self.tokens.values().next_back()
    }

    pub fn clear(&mut self) {
        self.tokens.clear();
    }
}

/// Replay guard: seen nonces with timed retention.
#[derive(Debug, Default, Clone)]
pub struct NonceStore {
    seen: BTreeMap<[u8; 16], f64>,
}

impl NonceStore {
    pub fn check_and_record(&mut self, nonce: [u8; 16], now: f64, retention_s: f64) -> bool {
        self.seen.retain(|_, t| now - *t <= retention_s);
        if self.seen.contains_key(&nonce) {
            return false;
        }
        self.seen.insert(nonce, now);
        true
    }

    pub fn contains(&self, nonce: &[u8; 16]) -> bool {
        self.seen.contains_key(nonce)
    }
}

/// Signed token-renewal request a vehicle sends to an RSU.
#[derive(Debug, Clone)]
pub struct TokenRequest {
    pub uuid: [u8; 16],
    pub chal: CompositeHash,
    pub resp_proof: [u8; 32],
    pub public_key: PublicKey,
    pub nonce: [u8; 16],
    pub position: Vec2,
    pub signature: [u8; 64],
}

impl TokenRequest {
    pub fn new<R: RngCore + CryptoRng>(
        credential: &VehicleCredential,
        position: Vec2,
        rng: &mut R,
    ) -> Self {
        let nonce: [u8; 16] = rng.gen();
        let mut req = TokenRequest {
            uuid: credential.uuid,
            chal: credential.chal,
            resp_proof: resp_proof(&credential.resp, &nonce),
            public_key: credential.keypair.public(),
            nonce,
            position,
            signature: [0; 64],
        };
        req.signature = credential.keypair.sign(&req.body_bytes());
        req
    }

    fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(1);
        w.put_bytes(&self.uuid);
        w.put_bytes(&self.chal.to_bytes());
        w.put_bytes(&self.resp_proof);
        w.put_bytes(&self.public_key.to_bytes());
        w.put_bytes(&self.nonce);
        w.put_f64(self.position.x);
        w.put_f64(self.position.y);
        w.finish()
    }
}

/// Road-side unit: holds distributed round signatures, validates token
/// requests, and issues sealed tokens.
#[derive(Debug)]
pub struct Rsu {
    pub position: Vec2,
    pub range_m: f64,
    signatures: BTreeMap<u64, RoundSignature>,
    nonces: NonceStore,
}

impl Rsu {
    pub fn new(position: Vec2, range_m: f64) -> Self {
        Rsu {
            position,
            range_m,
            signatures: BTreeMap::new(),
            nonces: NonceStore::default(),
        }
    }

    /// Installs a freshly distributed round signature, retaining the
    /// previous one for the overlap window.
    pub fn install_signature(&mut self, sig: RoundSignature) {
        self.signatures.insert(sig.round_num, sig);
        while self.signatures.len() > 2 {
            let oldest = *self.signatures.keys().next().unwrap();
            self.signatures.remove(&oldest);
        }
    }

    pub fn current_round(&self) -> Option<u64> {
        self.signatures.keys().next_back().copied()
    }

    pub fn within_range(&self, pos: Vec2) -> bool {
        (pos - self.position).norm() <= self.range_m
    }

    /// Validates a renewal request and returns a token sealed to the
    /// requester's public key.
    pub fn issue_token<R: RngCore + CryptoRng>(
        &mut self,
        authority: &Authority,
        request: &TokenRequest,
        now: f64,
        cfg: &AuthConfig,
        rng: &mut R,
    ) -> Result<SealedBox, AuthError> {
        if !self.within_range(request.position) {
            return Err(AuthError::OutOfRange);
        }
        if !request
            .public_key
            .verify_signature(&request.body_bytes(), &request.signature)
        {
            return Err(AuthError::BadSignature);
        }
        if !self
            .nonces
            .check_and_record(request.nonce, now, cfg.nonce_retention_s)
        {
            return Err(AuthError::ReplayedNonce);
        }
        if !authority.verify_credential(&request.uuid, &request.chal) {
            return Err(AuthError::InvalidCredential);
        }
        if authority.expected_resp_proof(&request.uuid, &request.nonce) != request.resp_proof {
            return Err(AuthError::InvalidCredential);
        }
        let sig = self
            .signatures
            .values()
            .next_back()
            .ok_or(AuthError::NoRoundSignature)?;
        let id = id_hash(&request.uuid);
        let token = RoundToken {
            chal_t: token_chal_basis(&id, sig.round_num).combine(&sig.sig),
            resp_t: token_resp_basis(&id, sig.round_num).combine(&sig.sig),
            bound_round: sig.round_num,
            issued_at: now,
        };
        Ok(seal_to(&request.public_key, &token.to_bytes(), rng))
    }
}

/// Authentication metadata attached to every broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthMeta {
    pub id_hash: [u8; 32],
    /// The sender's token challenge for `bound_round`.
    pub chal: CompositeHash,
    pub bound_round: u64,
    pub public_key: PublicKey,
    pub nonce: [u8; 16],
}

impl AuthMeta {
    pub fn for_broadcast<R: RngCore + CryptoRng>(
        credential: &VehicleCredential,
        token: &RoundToken,
        rng: &mut R,
    ) -> Self {
        AuthMeta {
            id_hash: credential.id_hash(),
            chal: token.chal_t,
            bound_round: token.bound_round,
            public_key: credential.keypair.public(),
            nonce: rng.gen(),
        }
    }

    pub fn encode_into(&self, w: &mut Writer) {
        w.put_fixed(&self.id_hash);
        w.put_fixed(&self.chal.to_bytes());
        w.put_u64(self.bound_round);
        w.put_fixed(&self.public_key.to_bytes());
        w.put_fixed(&self.nonce);
    }

    pub fn decode_from(r: &mut Reader) -> Result<Self, WireError> {
        let id_hash = r.take_fixed::<32>()?;
        let chal = CompositeHash::from_bytes(&r.take_fixed::<64>()?);
        let bound_round = r.take_u64()?;
        let public_key = PublicKey::from_bytes(&r.take_fixed::<64>()?);
        let nonce = r.take_fixed::<16>()?;
        Ok(AuthMeta {
            id_hash,
            chal,
            bound_round,
            public_key,
            nonce,
        })
    }
}

/// Token-relation check shared by direct and relayed verification: the
/// peer's challenge minus our own response token must equal the publicly
/// computable basis difference for the claimed round.
pub fn verify_peer_relation(
    own_id: &[u8; 32],
    wallet: &TokenWallet,
    current_round: u64,
    meta: &AuthMeta,
) -> Result<(), RejectReason> {
    if meta.bound_round > current_round {
        return Err(RejectReason::FutureRound);
    }
    if current_round - meta.bound_round > 1 {
        return Err(RejectReason::ExpiredToken);
    }
    let own_token = wallet
        .get(meta.bound_round)
        .ok_or(RejectReason::NoLocalToken)?;
    let lhs = meta.chal.subtract(&own_token.resp_t);
    let rhs = token_chal_basis(&meta.id_hash, meta.bound_round)
        .subtract(&token_resp_basis(own_id, meta.bound_round));
    if lhs != rhs {
        return Err(RejectReason::InvalidChallenge);
    }
    Ok(())
}

/// Verifies a peer broadcast against the local wallet.
///
/// Accepts tokens bound to the verifier's current round or the one
/// before; anything older is expired, anything newer is not yet valid
/// here. The nonce is recorded only on acceptance.
pub fn verify_peer(
    own_id: &[u8; 32],
    wallet: &TokenWallet,
    current_round: u64,
    meta: &AuthMeta,
    nonces: &mut NonceStore,
    now: f64,
    cfg: &AuthConfig,
) -> Result<(), RejectReason> {
    if nonces.contains(&meta.nonce) {
        return Err(RejectReason::Replay);
    }
    verify_peer_relation(own_id, wallet, current_round, meta)?;
    nonces.check_and_record(meta.nonce, now, cfg.nonce_retention_s);
    Ok(())
}
