/** Client-side file checks mirroring the server's guards, so bad uploads
 * never cost a network round trip. */

export const MAX_FILE_BYTES = 10 * 1024 * 1024; // server limit: 10 MiB

export type Validation = { ok: true } | { ok: false; reason: string };

export function validateFile(file: File): Validation {
  if (!file.type.startsWith("image/")) {
    return { ok: false, reason: `"${file.name}" is not an image` };
  }
  if (file.size > MAX_FILE_BYTES) {
    const mib = (file.size / (1024 * 1024)).toFixed(1);
    return { ok: false, reason: `file too large (${mib} MiB, limit 10 MiB)` };
  }
  return { ok: true };
}
