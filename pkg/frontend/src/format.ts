// Display helpers; the server speaks integer milliwatts and euro-cents.

export function kw(mw: number): string {
  return `${(mw / 1e6).toFixed(mw % 1e6 === 0 ? 1 : 2)} kW`;
}

export function euros(cents: number): string {
  const sign = cents < 0 ? "-" : "";
  const abs = Math.abs(cents);
  return `${sign}€${Math.floor(abs / 100)}.${String(abs % 100).padStart(2, "0")}`;
}

export function slotClock(slot: number, slotMinutes = 15): string {
  const minutes = slot * slotMinutes;
  const h = Math.floor(minutes / 60) % 24;
  const m = minutes % 60;
  return `${String(h).padStart(2, "0")}:${String(m).padStart(2, "0")}`;
}

export function windowLabel(start: number, length: number, slotMinutes = 15): string {
  return `${slotClock(start, slotMinutes)}–${slotClock(start + length, slotMinutes)}`;
}

/** Slots remaining before the window is fully in the past, given current slot. */
export function slotsUntilElapsed(startSlot: number, length: number, nowSlot: number): number {
  return Math.max(0, startSlot + length - nowSlot);
}

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
