//! Asymmetric keys behind an opaque interface: sign/verify plus
//! encrypt-to-public-key, which is all the protocol requires.
//!
//! Signatures are Ed25519. Sealing uses an ephemeral X25519 agreement
//! with a SHA-512 derived keystream and MAC (encrypt-then-MAC); the
//! construction is deliberately simple and swappable.

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, Rng, RngCore};
use sha2::{Digest, Sha512};
use x25519_dalek::{PublicKey as XPublicKey, StaticSecret};

/// Public half of a participant keypair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PublicKey {
    pub verify: [u8; 32],
    pub exchange: [u8; 32],
}

impl PublicKey {
    pub fn verify_signature(&self, message: &[u8], signature: &[u8; 64]) -> bool {
        let Ok(vk) = VerifyingKey::from_bytes(&self.verify) else {
            return false;
        };
        vk.verify(message, &Signature::from_bytes(signature)).is_ok()
    }

    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(&self.verify);
        out[32..].copy_from_slice(&self.exchange);
        out
    }

    pub fn from_bytes(bytes: &[u8; 64]) -> Self {
        let mut verify = [0u8; 32];
        let mut exchange = [0u8; 32];
        verify.copy_from_slice(&bytes[..32]);
        exchange.copy_from_slice(&bytes[32..]);
        PublicKey { verify, exchange }
    }
}

/// A participant's private keys.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
    exchange: StaticSecret,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("public", &self.public())
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut sk = [0u8; 32];
        rng.fill_bytes(&mut sk);
        let mut xk = [0u8; 32];
        rng.fill_bytes(&mut xk);
        KeyPair {
            signing: SigningKey::from_bytes(&sk),
            exchange: StaticSecret::from(xk),
        }
    }

    pub fn public(&self) -> PublicKey {
        PublicKey {
            verify: self.signing.verifying_key().to_bytes(),
            exchange: XPublicKey::from(&self.exchange).to_bytes(),
        }
    }

    pub fn sign(&self, message: &[u8]) -> [u8; 64] {
        self.signing.sign(message).to_bytes()
    }

    /// Decrypts a box sealed to this keypair's public half.
    pub fn open(&self, sealed: &SealedBox) -> Option<Vec<u8>> {
        let eph = XPublicKey::from(sealed.ephemeral);
        let shared = self.exchange.diffie_hellman(&eph);
        let key = derive_key(shared.as_bytes(), &sealed.ephemeral);
        if mac(&key, &sealed.ciphertext) != sealed.mac {
            return None;
        }
        Some(xor_keystream(&key, &sealed.ciphertext))
    }
}

/// Ciphertext addressed to one public key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedBox {
    pub ephemeral: [u8; 32],
    pub mac: [u8; 32],
    pub ciphertext: Vec<u8>,
}

/// Seals `plaintext` so only the holder of `recipient`'s private key can
/// read it.
pub fn seal_to<R: RngCore + CryptoRng>(
    recipient: &PublicKey,
    plaintext: &[u8],
    rng: &mut R,
) -> SealedBox {
    let eph_secret = StaticSecret::from(rng.gen::<[u8; 32]>());
    let eph_public = XPublicKey::from(&eph_secret).to_bytes();
    let shared = eph_secret.diffie_hellman(&XPublicKey::from(recipient.exchange));
    let key = derive_key(shared.as_bytes(), &eph_public);
    let ciphertext = xor_keystream(&key, plaintext);
    let mac = mac(&key, &ciphertext);
    SealedBox {
        ephemeral: eph_public,
        mac,
        ciphertext,
    }
}

fn derive_key(shared: &[u8; 32], ephemeral: &[u8; 32]) -> [u8; 32] {
    let mut h = Sha512::new();
    h.update(b"seal-key");
    h.update(shared);
    h.update(ephemeral);
    let digest = h.finalize();
    digest[..32].try_into().unwrap()
}

fn xor_keystream(key: &[u8; 32], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    let mut counter = 0u64;
    let mut block = [0u8; 64];
    for (i, byte) in data.iter().enumerate() {
        let offset = i % 64;
        if offset == 0 {
            let mut h = Sha512::new();
            h.update(b"seal-stream");
            h.update(key);
            h.update(counter.to_le_bytes());
            block.copy_from_slice(&h.finalize());
            counter += 1;
        }
        out.push(byte ^ block[offset]);
    }
    out
}

fn mac(key: &[u8; 32], data: &[u8]) -> [u8; 32] {
    let mut h = Sha512::new();
    h.update(b"seal-mac");
    h.update(key);
    h.update(data);
    h.finalize()[..32].try_into().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_verify_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kp = KeyPair::generate(&mut rng);
        let sig = kp.sign(b"message");
        assert!(kp.public().verify_signature(b"message", &sig));
        assert!(!kp.public().verify_signature(b"other", &sig));
    }

    #[test]
    fn tampered_signature_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let kp = KeyPair::generate(&mut rng);
        let mut sig = kp.sign(b"message");
        sig[5] ^= 0x40;
        assert!(!kp.public().verify_signature(b"message", &sig));
    }

    #[test]
    fn seal_open_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kp = KeyPair::generate(&mut rng);
        let sealed = seal_to(&kp.public(), b"token bytes", &mut rng);
        assert_eq!(kp.open(&sealed).unwrap(), b"token bytes");
    }

    #[test]
    fn wrong_recipient_cannot_open() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alice = KeyPair::generate(&mut rng);
        let eve = KeyPair::generate(&mut rng);
        let sealed = seal_to(&alice.public(), b"secret token", &mut rng);
        assert!(eve.open(&sealed).is_none());
    }

    #[test]
    fn tampered_ciphertext_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kp = KeyPair::generate(&mut rng);
        let mut sealed = seal_to(&kp.public(), b"secret token", &mut rng);
        sealed.ciphertext[0] ^= 1;
        assert!(kp.open(&sealed).is_none());
    }

    #[test]
    fn keygen_is_seed_deterministic() {
        let a = KeyPair::generate(&mut ChaCha8Rng::seed_from_u64(9));
        let b = KeyPair::generate(&mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a.public(), b.public());
    }
}
