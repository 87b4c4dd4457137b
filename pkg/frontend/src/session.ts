// Session persistence. localStorage can be unavailable (private mode,
// test DOMs without storage), so every access is wrapped.

import { setToken } from "./api.js";

const TOKEN_KEY = "broker-session";
const USER_KEY = "broker-user";

export function loadSession(): { token: string; userId: string } | null {
  try {
    const token = window.localStorage.getItem(TOKEN_KEY);
    const userId = window.localStorage.getItem(USER_KEY);
    if (token && userId) {
      setToken(token);
      return { token, userId };
    }
  } catch {
    // fall through: treat as signed out
  }
  return null;
}

export function saveSession(token: string, userId: string): void {
  setToken(token);
  try {
    window.localStorage.setItem(TOKEN_KEY, token);
    window.localStorage.setItem(USER_KEY, userId);
  } catch {
    // in-memory session only; survives until reload
  }
}

export function clearSession(): void {
  setToken(null);
  try {
    window.localStorage.removeItem(TOKEN_KEY);
    window.localStorage.removeItem(USER_KEY);
  } catch {
    // nothing stored to clear
  }
}
